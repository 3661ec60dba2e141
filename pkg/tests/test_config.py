"""Configuration parsing, validation locators, presets and round-trips."""

import pytest

from monodt.config import default_config, parse_config
from monodt.errors import ConfigError

MINIMAL_BR = """
[model]
id = br

[grid]
intervals = 32
length = 100.0

[run]
dt = 0.01
final_time = 1.0
"""


class TestParsing:
    def test_minimal_config_fills_defaults(self):
        cfg = parse_config(MINIMAL_BR)
        assert cfg["model.id"] == "br"
        assert cfg["grid.intervals"] == 32
        assert cfg["diffusion.sigma"] == 0.024085       # preset
        assert cfg["probe.threshold"] == -30.0          # preset
        assert cfg["run.scheme"] == "sbdf2"             # default
        assert cfg.provenance["grid.intervals"] == "user"
        assert cfg.provenance["diffusion.sigma"] == "preset"
        assert cfg.provenance["run.scheme"] == "default"

    def test_empty_config_uses_model_preset(self):
        cfg = parse_config("")
        assert cfg["grid.length"] == 100.0
        assert cfg["run.final_time"] == 400.0

    def test_odd_intervals_names_simpson_constraint(self):
        with pytest.raises(ConfigError) as err:
            parse_config(MINIMAL_BR.replace("intervals = 32", "intervals = 33"))
        assert err.value.locator == "grid.intervals"
        assert "Simpson" in str(err.value)

    def test_nonpositive_dt_rejected(self):
        with pytest.raises(ConfigError) as err:
            parse_config(MINIMAL_BR.replace("dt = 0.01", "dt = -0.5"))
        assert err.value.locator == "run.dt"

    def test_unknown_key_and_section(self):
        with pytest.raises(ConfigError) as err:
            parse_config(MINIMAL_BR.replace("intervals = 32", "width = 2"))
        assert err.value.locator == "grid.width"
        with pytest.raises(ConfigError) as err:
            parse_config(MINIMAL_BR + "\n[nonsense]\nx = 1\n")
        assert err.value.locator == "nonsense"

    def test_type_mismatch_has_locator(self):
        with pytest.raises(ConfigError) as err:
            parse_config(MINIMAL_BR.replace("dt = 0.01", "dt = soon"))
        assert err.value.locator == "run.dt"

    def test_unknown_scheme(self):
        with pytest.raises(ConfigError) as err:
            parse_config(MINIMAL_BR, overrides=["run.scheme=rk5"])
        assert err.value.locator == "run.scheme"


class TestOverrides:
    def test_set_overrides(self):
        cfg = parse_config(MINIMAL_BR, overrides=["run.dt=0.25", "run.scheme=fe"])
        assert cfg["run.dt"] == 0.25
        assert cfg["run.scheme"] == "fe"

    def test_model_param_override_reaches_model(self):
        cfg = parse_config(MINIMAL_BR, overrides=["model.params.g_na=3.5"])
        assert cfg.model().params["g_na"] == 3.5
        assert cfg.provenance["model.params.g_na"] == "user"

    def test_bad_override_rejected(self):
        with pytest.raises(ConfigError):
            parse_config(MINIMAL_BR, overrides=["nodots"])
        with pytest.raises(ConfigError):
            parse_config(MINIMAL_BR, overrides=["grid.width=2"])


class TestRoundTrip:
    @pytest.mark.parametrize("model_id", ("ms", "br", "tnnp"))
    def test_serialize_parse_fixed_point(self, model_id):
        cfg = default_config(model_id, **{"run.dt": 0.0123456789012345,
                                          "model.params.tau_in" if model_id == "ms"
                                          else "model.params.g_na": 1.25})
        text = cfg.serialize()
        again = parse_config(text)
        assert again.serialize() == text
        assert again.content_hash() == parse_config(text).content_hash()

    def test_float_list_round_trip(self):
        cfg = default_config("br", **{"converge.dts": "0.1, 0.05, 0.025"})
        assert cfg["converge.dts"] == (0.1, 0.05, 0.025)
        assert parse_config(cfg.serialize())["converge.dts"] == (0.1, 0.05, 0.025)


class TestDerivedDiffusion:
    def test_sigma_from_tissue_parameters(self):
        cfg = parse_config(MINIMAL_BR, overrides=[
            "diffusion.sigma=0", "diffusion.anisotropy_ratio=1.0",
            "diffusion.sigma_i=3.0", "diffusion.chi=1000.0"])
        assert cfg.sigma() == pytest.approx(0.0015)

    def test_incomplete_tissue_parameters(self):
        cfg = parse_config(MINIMAL_BR, overrides=["diffusion.sigma=0"])
        with pytest.raises(ConfigError):
            cfg.sigma()


class TestProbeValidation:
    def test_probe_order(self):
        with pytest.raises(ConfigError) as err:
            parse_config(MINIMAL_BR, overrides=["probe.x1=1.5", "probe.x2=0.5"])
        assert err.value.locator == "probe.x2"

    def test_probe_inside_domain(self):
        with pytest.raises(ConfigError):
            parse_config(MINIMAL_BR, overrides=["probe.x2=700.0"])
