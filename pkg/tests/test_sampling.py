"""
Testes da amostragem por proporção de propriedade e dos conjuntos de consulta.
"""
import numpy as np
import pytest

from conftest import make_samples
from exceptions import InsufficientSamples, InvalidSpec
from transform.samples import PropertyProportion
from transform.sampling import (
    balanced_by_property,
    build_query_aux,
    max_feasible_size,
    sample_with_proportion,
)


def test_proportion_must_sum_to_one():
    with pytest.raises(InvalidSpec):
        PropertyProportion((0.3, 0.3))
    with pytest.raises(InvalidSpec):
        PropertyProportion((1.2, -0.2))


def test_from_ratio_normalizes():
    p = PropertyProportion.from_ratio(2, 8)
    assert p.weights == pytest.approx((0.2, 0.8))
    assert PropertyProportion.parse(p.key()) == p


def test_largest_remainder_counts():
    assert PropertyProportion((1 / 3, 2 / 3)).counts(10).tolist() == [3, 7]
    assert PropertyProportion((0.2, 0.8)).counts(250).tolist() == [50, 200]
    assert PropertyProportion((1 / 3, 1 / 3, 1 / 3)).counts(10).sum() == 10


def test_sample_with_proportion_exact_counts(balanced_pool):
    drawn = sample_with_proportion(balanced_pool, PropertyProportion((0.2, 0.8)), 10, seed=1)
    assert len(drawn) == 10
    assert drawn.property_counts().tolist() == [2, 8]


def test_sample_with_degenerate_proportion(balanced_pool):
    drawn = sample_with_proportion(balanced_pool, PropertyProportion((1.0, 0.0)), 5, seed=1)
    assert drawn.property_counts().tolist() == [5, 0]


def test_sample_with_proportion_is_deterministic(balanced_pool):
    a = sample_with_proportion(balanced_pool, PropertyProportion((0.5, 0.5)), 20, seed=3)
    b = sample_with_proportion(balanced_pool, PropertyProportion((0.5, 0.5)), 20, seed=3)
    assert np.array_equal(a.ids, b.ids)


def test_sample_with_proportion_insufficient(balanced_pool):
    with pytest.raises(InsufficientSamples):
        sample_with_proportion(balanced_pool, PropertyProportion((1.0, 0.0)), 60, seed=0)


def test_sample_with_wrong_arity(balanced_pool):
    with pytest.raises(InvalidSpec):
        sample_with_proportion(balanced_pool, PropertyProportion((0.2, 0.3, 0.5)), 10, seed=0)


def test_build_query_aux_sizes_and_disjointness(balanced_pool):
    proportions = [PropertyProportion((0.2, 0.8)), PropertyProportion((0.5, 0.5))]
    query = build_query_aux(balanced_pool, proportions, 20, seed=5)

    assert query[proportions[0]].property_counts().tolist() == [4, 16]
    assert query[proportions[1]].property_counts().tolist() == [10, 10]
    assert not (query[proportions[0]].id_set() & query[proportions[1]].id_set())


def test_build_query_aux_exhausts_pool():
    pool = make_samples([0] * 10 + [1] * 10)
    query = build_query_aux(pool, [PropertyProportion((0.5, 0.5))], 20, seed=0)
    assert query[PropertyProportion((0.5, 0.5))].id_set() == pool.id_set()


def test_build_query_aux_overlapping_demand(balanced_pool):
    proportions = [PropertyProportion((0.2, 0.8)), PropertyProportion((0.1, 0.9))]
    with pytest.raises(InsufficientSamples):
        build_query_aux(balanced_pool, proportions, 40, seed=0)


def test_max_feasible_size():
    pool = make_samples([0] * 10 + [1] * 40)
    assert max_feasible_size(pool, PropertyProportion((0.5, 0.5))) == 20


def test_balanced_by_property_truncates():
    pool = make_samples([0] * 10 + [1] * 40)
    balanced = balanced_by_property(pool, None, seed=0)
    assert balanced.property_counts().tolist() == [10, 10]
