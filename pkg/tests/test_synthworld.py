import json
from pathlib import Path

import numpy as np
import pytest

from landkit.dataset import DatasetManifest
from landkit.metrics import ndvi_mean
from landkit.raster import RasterStack
from landkit.rng import Rng, prng_next
from landkit.synthworld import (
    DEFAULT_PREDICTORS,
    WorldConfig,
    gen_conditions,
    gen_dataset,
    gen_imagery,
    latent_seed_for,
    region_for_lon,
)


class TestPrng:
    def test_progression(self):
        s1, u1 = prng_next(0)
        s2, u2 = prng_next(s1)
        assert (s1, u1) != (s2, u2)

    def test_determinism(self):
        assert prng_next(12345) == prng_next(12345)

    def test_unit_interval(self):
        state = 99
        for _ in range(1000):
            state, u = prng_next(state)
            assert 0.0 <= u < 1.0

    def test_large_sample_mean(self):
        # law of large numbers on the stream started at state 0
        draws = Rng(0).next_floats(1_000_000)
        assert 0.499 <= draws.mean() <= 0.501


def _conditions_stack(cfg, elevation, temp, precip, agri=0.0):
    h, w = cfg.height, cfg.width
    channels = []
    for name in cfg.predictor_set:
        if name == "elevation":
            channels.append(np.full((h, w), elevation))
        elif name == "temperature_mean":
            channels.append(np.full((h, w), temp))
        elif name == "precipitation_annual":
            channels.append(np.full((h, w), precip))
        elif name == "litho_a":
            channels.append(np.ones((h, w)))
        elif name in ("litho_b", "litho_c"):
            channels.append(np.zeros((h, w)))
        elif name == "anthro_agriculture":
            channels.append(np.full((h, w), agri))
        else:
            channels.append(np.full((h, w), 0.5))
    return RasterStack.from_array(cfg.predictor_set, np.stack(channels), cfg.cell_size_m)


class TestConditions:
    def test_deterministic(self):
        cfg = WorldConfig(seed=5, n_samples=3, width=16, height=16)
        a = gen_conditions(cfg, 1)
        b = gen_conditions(cfg, 1)
        assert a[:3] == b[:3]
        assert np.array_equal(a[3].values, b[3].values)

    def test_litho_one_hot(self):
        cfg = WorldConfig(seed=5, n_samples=2, width=16, height=16)
        _, _, _, cond = gen_conditions(cfg, 0)
        total = sum(cond.channel(n) for n in ("litho_a", "litho_b", "litho_c"))
        assert np.array_equal(total, np.ones((16, 16), dtype=np.float32))

    def test_temperature_anticorrelated_with_elevation(self):
        cfg = WorldConfig(seed=5, n_samples=2)
        _, _, _, cond = gen_conditions(cfg, 0)
        r = np.corrcoef(
            cond.channel("elevation").ravel(), cond.channel("temperature_mean").ravel()
        )[0, 1]
        assert r < 0.0

    def test_index_out_of_range(self):
        cfg = WorldConfig(seed=5, n_samples=2, width=16, height=16)
        with pytest.raises(IndexError):
            gen_conditions(cfg, 2)

    def test_region_rule(self):
        assert region_for_lon(-100.0) == "west"
        assert region_for_lon(-170.0) == "west"
        assert region_for_lon(-29.9) == "east"
        assert region_for_lon(20.0) == "east"

    def test_west_offset_shifts_temperature(self):
        base = WorldConfig(seed=5, n_samples=30, width=8, height=8)
        hot = WorldConfig(
            seed=5, n_samples=30, width=8, height=8, west_temperature_offset=0.4
        )
        for i in range(30):
            _, _, region, cond_a = gen_conditions(base, i)
            _, _, _, cond_b = gen_conditions(hot, i)
            delta = cond_b.channel("temperature_mean") - cond_a.channel(
                "temperature_mean"
            )
            if region == "west":
                assert np.allclose(delta, 0.4, atol=1e-6)
            else:
                assert np.allclose(delta, 0.0)


class TestImagery:
    def test_all_water_world_means_negative_ndvi(self):
        cfg = WorldConfig(seed=9, n_samples=1, width=16, height=16, sea_level=10.0)
        _, _, _, cond = gen_conditions(cfg, 0)
        img = gen_imagery(cond, cfg, latent_seed_for(cfg, 0))
        assert ndvi_mean(img) < 0.0
        assert np.all(img.channel("nir") < img.channel("red"))

    def test_zero_latent_weight_is_pure_function_of_conditions(self):
        cfg = WorldConfig(seed=9, n_samples=1, width=16, height=16, latent_noise_weight=0.0)
        _, _, _, cond = gen_conditions(cfg, 0)
        a = gen_imagery(cond, cfg, 123)
        b = gen_imagery(cond, cfg, 456)
        assert np.array_equal(a.values, b.values)

    def test_latent_weight_varies_with_seed(self):
        cfg = WorldConfig(seed=9, n_samples=1, width=16, height=16, latent_noise_weight=0.3)
        _, _, _, cond = gen_conditions(cfg, 0)
        a = gen_imagery(cond, cfg, 123)
        b = gen_imagery(cond, cfg, 456)
        assert not np.array_equal(a.values, b.values)

    def test_wet_temperate_greener_than_desert(self):
        cfg = WorldConfig(seed=9, n_samples=1, width=16, height=16, latent_noise_weight=0.0)
        lush = gen_imagery(_conditions_stack(cfg, 0.5, 0.45, 0.95), cfg, 0)
        desert = gen_imagery(_conditions_stack(cfg, 0.5, 0.45, 0.0), cfg, 0)
        assert ndvi_mean(lush) > ndvi_mean(desert)
        # vegetated land: nir above red
        assert np.all(lush.channel("nir") > lush.channel("red"))
        # bare soil: red above green
        assert np.all(desert.channel("red") > desert.channel("green"))

    def test_ndvi_monotone_in_precipitation(self):
        cfg = WorldConfig(seed=9, n_samples=1, width=16, height=16, latent_noise_weight=0.0)
        values = [
            ndvi_mean(gen_imagery(_conditions_stack(cfg, 0.5, 0.45, p), cfg, 0))
            for p in np.linspace(0.0, 1.0, 9)
        ]
        assert all(b >= a for a, b in zip(values, values[1:]))

    def test_channel_mismatch_rejected(self):
        cfg = WorldConfig(seed=9, n_samples=1, width=16, height=16)
        bad = RasterStack.from_array(["x"], np.zeros((1, 16, 16)))
        with pytest.raises(ValueError, match="predictor_set"):
            gen_imagery(bad, cfg, 0)


class TestDataset:
    def test_manifest_lists_every_sample(self, tmp_path):
        cfg = WorldConfig(seed=2, n_samples=10, width=8, height=8)
        manifest = gen_dataset(cfg, tmp_path / "ds")
        assert len(manifest) == 10
        for e in manifest:
            assert (manifest.root / e.conditions_path).exists()
            assert (manifest.root / e.imagery_path).exists()
        loaded = DatasetManifest.load(tmp_path / "ds")
        assert loaded.ids() == manifest.ids()
        assert loaded.predictor_names == DEFAULT_PREDICTORS

    def test_same_config_gives_byte_identical_trees(self, tmp_path):
        cfg = WorldConfig(seed=2, n_samples=4, width=8, height=8)
        gen_dataset(cfg, tmp_path / "a")
        gen_dataset(cfg, tmp_path / "b")
        files_a = sorted(p.relative_to(tmp_path / "a") for p in (tmp_path / "a").rglob("*") if p.is_file())
        files_b = sorted(p.relative_to(tmp_path / "b") for p in (tmp_path / "b").rglob("*") if p.is_file())
        assert files_a == files_b
        for rel in files_a:
            assert (tmp_path / "a" / rel).read_bytes() == (tmp_path / "b" / rel).read_bytes()

    def test_different_seeds_differ(self, tmp_path):
        ma = gen_dataset(WorldConfig(seed=2, n_samples=3, width=8, height=8), tmp_path / "a")
        mb = gen_dataset(WorldConfig(seed=3, n_samples=3, width=8, height=8), tmp_path / "b")
        diffs = [
            (ma.root / ea.imagery_path).read_bytes() != (mb.root / eb.imagery_path).read_bytes()
            for ea, eb in zip(ma, mb)
        ]
        assert any(diffs)

    def test_sample_loads_with_valid_invariants(self, small_world):
        manifest, _ = small_world
        sample = manifest.load_sample(manifest.ids()[0])
        assert sample.imagery.channel_names == ("blue", "green", "red", "nir")
        assert sample.conditions.width == sample.imagery.width

    def test_config_validation(self):
        with pytest.raises(ValueError):
            WorldConfig(n_samples=0)
        with pytest.raises(ValueError):
            WorldConfig(latent_noise_weight=1.0)
        with pytest.raises(ValueError):
            WorldConfig(predictor_set=("elevation", "temperature_mean"))
