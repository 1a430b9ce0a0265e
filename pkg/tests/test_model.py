"""Parameter validation and config file parsing."""

import dataclasses

import pytest

from gesched.model import (AssumptionViolation, ConfigError, ModelParams,
                           ParameterError, SolverConfig, build_from_mapping,
                           config_mapping, parse_config_text,
                           stationary_belief, validate, validate_config)


def test_defaults_validate():
    p = validate(ModelParams())
    assert p.a == 0.9 and p.lam == 1.0 and p.beta == 0.9
    # validate is idempotent and returns the same (frozen) params
    assert validate(p) == p


def test_stationary_belief_fixed_point():
    p = ModelParams()
    bbar = stationary_belief(p)
    # fixed point of b -> b p11 + (1-b) p01
    assert abs(bbar - (bbar * p.p11 + (1 - bbar) * p.p01)) < 1e-15
    assert abs(bbar - 0.3 / (1 - 0.8 + 0.3)) < 1e-15


def test_parameter_ranges():
    with pytest.raises(ParameterError):
        validate(dataclasses.replace(ModelParams(), beta=1.0))
    with pytest.raises(ParameterError):
        validate(dataclasses.replace(ModelParams(), beta=0.0))
    with pytest.raises(ParameterError):
        validate(dataclasses.replace(ModelParams(), lam=-0.5))
    with pytest.raises(ParameterError):
        validate(dataclasses.replace(ModelParams(), p01=0.0))
    with pytest.raises(ParameterError):
        validate(dataclasses.replace(ModelParams(), p11=1.5))


def test_stability_assumption():
    # a^2 (1 - p01) must stay below 1
    bad = dataclasses.replace(ModelParams(), a=1.5)
    with pytest.raises(AssumptionViolation) as info:
        validate(bad)
    assert info.value.assumption == "stability"
    assert "1.575" in str(info.value)
    # |a| slightly under the critical value is fine
    ok = dataclasses.replace(ModelParams(), a=1.19)  # 1.19^2 * 0.7 = 0.99127
    validate(ok)


def test_channel_order_assumption():
    bad = dataclasses.replace(ModelParams(), p01=0.8, p11=0.3)
    with pytest.raises(AssumptionViolation) as info:
        validate(bad)
    assert info.value.assumption == "channel_order"
    # explicit override lets an unordered channel through
    soft = dataclasses.replace(bad, allow_unordered_channel=True)
    validate(soft)


def test_config_validation():
    validate_config(SolverConfig())
    with pytest.raises(ParameterError):
        validate_config(dataclasses.replace(SolverConfig(), n_error=1))
    with pytest.raises(ParameterError):
        validate_config(dataclasses.replace(SolverConfig(), e_max=0.0))
    with pytest.raises(ParameterError):
        validate_config(dataclasses.replace(SolverConfig(), vi_tolerance=0.0))
    with pytest.raises(ParameterError):
        validate_config(dataclasses.replace(SolverConfig(), pad_sigmas=-1.0))
    with pytest.raises(ParameterError):
        validate_config(dataclasses.replace(SolverConfig(), quadrature="magic"))


def test_parse_config_text():
    raw = parse_config_text("""
    # comment line
    a = 0.5
    lambda = 2.0   # trailing comment
    n_error = 201
    """)
    assert raw == {"a": "0.5", "lambda": "2.0", "n_error": "201"}


def test_parse_config_errors_carry_line_numbers():
    with pytest.raises(ConfigError) as info:
        parse_config_text("a = 0.5\nbogus = 1\n")
    assert info.value.lineno == 2
    with pytest.raises(ConfigError) as info:
        parse_config_text("a = 0.5\n\na = 0.6\n")
    assert info.value.lineno == 3
    with pytest.raises(ConfigError) as info:
        parse_config_text("just some words\n")
    assert info.value.lineno == 1
    with pytest.raises(ConfigError) as info:
        parse_config_text("a =\n")
    assert info.value.lineno == 1


def test_build_from_mapping_strings_and_typed():
    params, config = build_from_mapping({"lambda": "2.5", "n_error": 101,
                                         "allow_unordered_channel": "yes"})
    assert params.lam == 2.5
    assert params.allow_unordered_channel is True
    assert config.n_error == 101
    # untouched keys keep defaults
    assert params.a == 0.9 and config.n_belief == 101
    with pytest.raises(ConfigError):
        build_from_mapping({"n_error": "many"})
    with pytest.raises(ConfigError):
        build_from_mapping({"nope": 1})


def test_build_from_mapping_validates():
    with pytest.raises(AssumptionViolation):
        build_from_mapping({"a": "1.5"})


def test_config_mapping_round_trip():
    params, config = build_from_mapping({"lambda": 0.25, "pad_sigmas": 5.0})
    flat = config_mapping(params, config)
    params2, config2 = build_from_mapping(flat)
    assert params2 == params and config2 == config
    assert flat["lambda"] == 0.25
