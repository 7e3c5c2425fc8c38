"""Exhaustive checks of the bonding and angle tables."""

import itertools

from plusmesh.rules import (bend_location, bend_location_bond_allowed,
                            fold_angle_deg, gene_up_bond_allowed,
                            mirror_of_template, phene_up_bond_allowed)

TYPES = (1, 2, 3, 4)


def test_gene_up_bonds_all_16():
    for a, b in itertools.product(TYPES, repeat=2):
        assert gene_up_bond_allowed(a, b) == (a == b)


def test_phene_up_bonds_all_16():
    allowed = {(2, 2), (3, 4), (4, 3), (4, 4)}
    for a, b in itertools.product(TYPES, repeat=2):
        assert phene_up_bond_allowed(a, b) == ((a, b) in allowed)


def test_fold_angles_all_16():
    expected = {
        (1, 1): 0, (1, 2): 0, (1, 3): 0, (1, 4): 0,
        (2, 1): 0, (2, 2): 120, (2, 3): 45, (2, 4): 90,
        (3, 1): 0, (3, 2): 45, (3, 3): None, (3, 4): None,
        (4, 1): 0, (4, 2): 90, (4, 3): None, (4, 4): 60,
    }
    for a, b in itertools.product(TYPES, repeat=2):
        assert fold_angle_deg(a, b) == expected[(a, b)]


def test_fold_angle_symmetry_where_defined():
    for a, b in itertools.product(TYPES, repeat=2):
        x, y = fold_angle_deg(a, b), fold_angle_deg(b, a)
        if x is not None and y is not None:
            assert x == y


def test_bend_location_all_neighbour_combinations():
    # type 1 is the only straight neighbour; an absent neighbour bends
    for lt, rt in itertools.product((None,) + TYPES, repeat=2):
        bl = bend_location(lt, rt)
        left_straight = lt == 1
        right_straight = rt == 1
        if left_straight and right_straight:
            assert bl == 4
        elif left_straight:
            assert bl == 2
        elif right_straight:
            assert bl == 1
        else:
            assert bl == 3


def test_bend_location_bonds_all_16():
    allowed = {(1, 2), (2, 1), (3, 3)}
    for a, b in itertools.product((1, 2, 3, 4), repeat=2):
        assert bend_location_bond_allowed(a, b) == ((a, b) in allowed)


def test_mirror_of_template():
    assert mirror_of_template([2, 4, 2, 1]) == [1, 2, 4, 2]
    assert mirror_of_template([2, 2, 2]) == [2, 2, 2]
