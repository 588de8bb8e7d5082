import json
import os
import tempfile
import unittest
from pathlib import Path

import pytest

from splurge_cnoma_capacity.config import (
    FIGURE_PRESETS,
    RunConfig,
    create_sample_config,
    load_config,
)
from splurge_cnoma_capacity.exceptions import InfeasibleAllocationError
from splurge_cnoma_capacity.mc_sim import BaselineSplit


class TestLoadConfig(unittest.TestCase):
    """Test loading configuration files."""

    def test_load_config_valid(self):
        """Test loading a valid configuration file."""
        with tempfile.NamedTemporaryFile(mode='w', suffix='.json', delete=False) as f:
            json.dump({"rho_db": 20.0, "trials": 5000, "schemes": ["cnoma"]}, f)
            config_path = Path(f.name)

        try:
            loaded = load_config(config_path)
            assert loaded["rho_db"] == 20.0
            assert loaded["trials"] == 5000
            assert loaded["schemes"] == ["cnoma"]
        finally:
            os.unlink(config_path)

    def test_load_config_file_not_found(self):
        """Test loading a non-existent configuration file."""
        with pytest.raises(FileNotFoundError):
            load_config(Path("nonexistent.json"))

    def test_load_config_invalid_json(self):
        """Test loading an invalid JSON configuration file."""
        with tempfile.NamedTemporaryFile(mode='w', suffix='.json', delete=False) as f:
            f.write('{"rho_db": fifteen}')
            config_path = Path(f.name)

        try:
            with pytest.raises(json.JSONDecodeError):
                load_config(config_path)
        finally:
            os.unlink(config_path)

    def test_load_config_unknown_key(self):
        """Test unknown keys are rejected by name."""
        with tempfile.NamedTemporaryFile(mode='w', suffix='.json', delete=False) as f:
            json.dump({"rho_db": 10.0, "snr": 10.0}, f)
            config_path = Path(f.name)

        try:
            with pytest.raises(ValueError, match="snr"):
                load_config(config_path)
        finally:
            os.unlink(config_path)

    def test_load_config_not_an_object(self):
        """Test a JSON array is rejected."""
        with tempfile.NamedTemporaryFile(mode='w', suffix='.json', delete=False) as f:
            json.dump([1, 2, 3], f)
            config_path = Path(f.name)

        try:
            with pytest.raises(ValueError):
                load_config(config_path)
        finally:
            os.unlink(config_path)

    def test_create_sample_config(self):
        """Test the sample configuration holds every key and loads back to the defaults."""
        with tempfile.TemporaryDirectory() as temp_dir:
            output_path = Path(temp_dir) / "sample.json"
            create_sample_config(output_path)

            assert output_path.exists()
            loaded = load_config(output_path)
            assert set(loaded) == set(RunConfig.keys())
            assert RunConfig.from_layers(loaded) == RunConfig()


class TestRunConfig(unittest.TestCase):
    """Test the layered RunConfig."""

    def test_defaults(self):
        """Test the default operating point."""
        config = RunConfig()
        point = config.operating_point()
        self.assertEqual(point.rho_db, 15.0)
        self.assertAlmostEqual(point.oam.principal_singular_value, 0.5, places=15)
        self.assertEqual(point.links.bs_ccu.k_factor, 5.0)
        self.assertEqual(point.links.bs_ceu.omega, 9.0)
        self.assertEqual(config.split(), BaselineSplit.POWER_CONSERVING)
        self.assertEqual(config.control().max_order, 40)

    def test_layer_precedence(self):
        """Test later layers win and None leaves the lower value in place."""
        file_layer = {"rho_db": 20.0, "seed": 3}
        flag_layer = {"rho_db": 25.0, "seed": None}
        config = RunConfig.from_layers(file_layer, flag_layer)
        self.assertEqual(config.rho_db, 25.0)
        self.assertEqual(config.seed, 3)

    def test_unknown_layer_key(self):
        """Test unknown keys in any layer are rejected."""
        with pytest.raises(ValueError, match="pn2"):
            RunConfig.from_layers({}, {"pn2": 0.1})

    def test_figure_preset_sits_below_explicit_keys(self):
        """Test a figure preset fills keys the layers do not set."""
        config = RunConfig.from_layers({"figure": 3, "sweep_constraint": "fixed_pn1"})
        self.assertEqual(config.sweep_variable, "p_n2")
        self.assertEqual(config.sweep_constraint, "fixed_pn1")
        self.assertEqual(config.schemes, ["cnoma_oam"])
        self.assertEqual(config.figure, 3)

    def test_figure_preset_is_not_shared(self):
        """Test mutating a built configuration leaves the preset untouched."""
        config = RunConfig.for_figure(4)
        config.schemes.append("extra")
        self.assertEqual(FIGURE_PRESETS[4]["schemes"], ["cnoma_oam", "cnoma", "oma_oam"])

    def test_unknown_figure(self):
        """Test figures outside the presets are rejected."""
        with pytest.raises(ValueError):
            RunConfig.for_figure(9)

    def test_grid_is_inclusive(self):
        """Test the grid includes both ends without float drift."""
        self.assertEqual(RunConfig.for_figure(3).grid(), (0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35))
        snr_grid = RunConfig.for_figure(5).grid()
        self.assertEqual(len(snr_grid), 13)
        self.assertEqual(snr_grid[0], 0.0)
        self.assertEqual(snr_grid[-1], 30.0)

    def test_invalid_values(self):
        """Test invalid enumerations and counts are rejected."""
        for overrides in (
                {"sweep_variable": "p_f"},
                {"methods": ["simulation"]},
                {"methods": []},
                {"schemes": ["noma"]},
                {"trials": 0},
                {"grid_step": 0.0},
                {"baseline_split": "even"},
                {"oam_model": "helical"},
        ):
            with self.subTest(overrides=overrides):
                with pytest.raises(ValueError):
                    RunConfig(**overrides)

    def test_wrong_types_name_the_key(self):
        """Test values of the wrong type raise ValueError naming the key."""
        for key, value in (
                ("trials", "1000"),
                ("rho_db", "15"),
                ("antennas", 2.5),
                ("seed", True),
                ("schemes", "cnoma_oam"),
                ("methods", ["closed_form", 3]),
                ("verbose", 1),
                ("output", 42),
                ("figure", "three"),
        ):
            with self.subTest(key=key, value=value):
                with pytest.raises(ValueError, match=key):
                    RunConfig.from_layers({key: value})

    def test_numeric_values_are_coerced(self):
        """Test JSON-style numbers are converted to the field types."""
        config = RunConfig.from_layers({"trials": 1e6, "rho_db": 20, "schemes": ("cnoma",)})
        self.assertEqual(config.trials, 1_000_000)
        self.assertIsInstance(config.trials, int)
        self.assertIsInstance(config.rho_db, float)
        self.assertEqual(config.schemes, ["cnoma"])

    def test_infeasible_operating_point(self):
        """Test an allocation breaking the ordering raises InfeasibleAllocationError."""
        config = RunConfig(p_f=0.3, p_n1=0.4, p_n2=0.3)
        with pytest.raises(InfeasibleAllocationError):
            config.operating_point()

    def test_with_overrides(self):
        """Test copies with replaced keys."""
        config = RunConfig().with_overrides(antennas=8, oam_model="circulant")
        self.assertEqual(config.oam_channel().antennas, 8)
        with pytest.raises(ValueError):
            RunConfig().with_overrides(power=2.0)


if __name__ == '__main__':
    unittest.main()
