import math

import pytest

from peelbound.core.errors import InstanceError, InstanceParseError
from peelbound.services.instance import (
    EARTH_ELEMENTS,
    SplitMix64,
    evaluate_tour,
    generate,
    load_csv,
    parse_csv,
    parse_tour,
    validate_tour,
    write_csv,
)
from peelbound.services.orbital import AU_KM


HEADER = "name,a_km,e,i_rad,raan_rad,argp_rad,M0_rad,epoch_day\n"


def test_splitmix_reference_values():
    rng = SplitMix64(0)
    assert rng.next_u64() == 0xE220A8397B1DCDAF
    assert rng.next_u64() == 0x6E789E6AA1B965F4


def test_generate_is_deterministic():
    assert generate(5, 42) == generate(5, 42)
    assert write_csv(generate(5, 42)) == write_csv(generate(5, 42))


def test_generate_depends_on_seed():
    assert generate(5, 42).bodies[1:] != generate(5, 43).bodies[1:]


def test_generated_elements_stay_in_range():
    instance = generate(2000, 1)
    assert instance.n == 2000
    assert instance.bodies[0].elements == EARTH_ELEMENTS
    for body in instance.bodies[1:]:
        el = body.elements
        assert 2.0 * AU_KM <= el.semi_major_axis <= 3.5 * AU_KM
        assert 0.0 <= el.eccentricity <= 0.25
        assert 0.0 <= el.inclination <= math.radians(10.0)
        for angle in (el.raan, el.arg_periapsis, el.mean_anomaly_at_epoch):
            assert 0.0 <= angle < 2.0 * math.pi
    assert instance.bodies[1].name == "A0001"


def test_generate_needs_an_asteroid():
    with pytest.raises(InstanceError):
        generate(0, 1)


def test_csv_round_trip(tmp_path):
    instance = generate(4, 7)
    path = tmp_path / "inst.csv"
    write_csv(instance, path)
    loaded = load_csv(path)
    assert loaded.bodies == instance.bodies
    assert loaded.n == 4


def test_missing_earth_row_uses_default_elements():
    text = HEADER + "Ceres,4.14e8,0.0758,0.1849,1.4016,1.2839,1.6,0\nVesta,3.53e8,0.0887,0.1251,1.8,2.6,3.0,0\n"
    instance = parse_csv(text)
    assert instance.n == 2
    assert instance.bodies[0].name == "Earth"
    assert instance.bodies[0].elements == EARTH_ELEMENTS


def test_epochs_are_normalized_to_earth():
    text = (
        HEADER
        + "Ceres,4.14e8,0.0758,0.1849,1.4016,1.2839,1.6,60100\n"
        + "Earth,1.496e8,0.0167,0,0,1.79,0,60000\n"
    )
    instance = parse_csv(text)
    assert instance.bodies[0].name == "Earth"
    assert instance.bodies[0].elements.epoch == 0.0
    assert instance.bodies[1].elements.epoch == 100.0


def test_missing_column_is_named():
    text = "name,a_km,e,i_rad,raan_rad,argp_rad,epoch_day\nCeres,4.14e8,0.07,0.1,1.4,1.2,0\n"
    with pytest.raises(InstanceParseError) as exc:
        parse_csv(text)
    assert exc.value.column == "M0_rad"


def test_malformed_value_reports_line_and_column():
    text = HEADER + "Ceres,4.14e8,0.07,0.1,1.4,1.2,1.6,0\nVesta,lots,0.08,0.1,1.8,2.6,3.0,0\n"
    with pytest.raises(InstanceParseError) as exc:
        parse_csv(text)
    assert exc.value.line == 3
    assert exc.value.column == "a_km"


def test_hyperbolic_row_is_rejected():
    text = HEADER + "Oumuamua,1.0e8,1.2,2.0,0.4,4.1,0.0,0\n"
    with pytest.raises(InstanceParseError) as exc:
        parse_csv(text)
    assert exc.value.column == "e"


def test_duplicate_names_are_rejected():
    text = HEADER + "Ceres,4.14e8,0.07,0.1,1.4,1.2,1.6,0\nCeres,4.14e8,0.07,0.1,1.4,1.2,1.6,0\n"
    with pytest.raises(InstanceParseError):
        parse_csv(text)


def test_parse_tour():
    assert parse_tour("0,3,1,2") == [0, 3, 1, 2]
    with pytest.raises(InstanceError):
        parse_tour("0,a")


@pytest.mark.parametrize("tour", [[1, 2, 3], [0, 1, 2], [0, 1, 1, 2], [0, 1, 2, 4]])
def test_invalid_tours_are_rejected(tour):
    with pytest.raises(InstanceError):
        validate_tour(generate(3, 1), tour)


def test_evaluate_tour_sums_legs(small_grid):
    instance, model, memo = small_grid
    tour = [0, 3, 1, 4, 2]
    cost = evaluate_tour(instance, tour, memo)
    eta, expected = 0.0, 0.0
    for src, dst in zip(tour, tour[1:]):
        leg = model.black_box(model.query(src, dst, eta))
        expected += leg.z
        eta += leg.tau + leg.t
    assert cost == pytest.approx(expected)


def test_evaluate_tour_is_independent_of_memo_state(grid_factory):
    instance, _, warm = grid_factory(4, seed=3)
    for tour in ([0, 1, 2, 3, 4], [0, 4, 3, 2, 1], [0, 2, 1, 4, 3]):
        evaluate_tour(instance, tour, warm)
    _, _, cold = grid_factory(4, seed=3)
    assert evaluate_tour(instance, [0, 2, 1, 4, 3], warm) == evaluate_tour(instance, [0, 2, 1, 4, 3], cold)


def test_tour_direction_matters(small_grid):
    instance, _, memo = small_grid
    assert evaluate_tour(instance, [0, 1, 2, 3, 4], memo) != evaluate_tour(instance, [0, 4, 3, 2, 1], memo)
