"""Deterministic procedural generator of (conditions, imagery) sample pairs.

The world is a pure function of a 64-bit seed. Conditions channels are
multi-octave value-noise fields (or fields derived from them), and the
imagery follows a documented closed-form mapping from those conditions
plus an optional latent noise component, so the ground truth relating
predictors to reflectance is known exactly and can be tested against.

Imagery mapping, per pixel (all bands clipped to [0, 1]):

* greenness ``g = smoothstep(prec_n) * smoothstep(1 - 2|temp_n - 0.45|)``
  where ``prec_n``/``temp_n`` are the precipitation/temperature channels
  clipped to [0, 1]; ``g`` is blended with a latent value-noise field at
  weight ``latent_noise_weight``; inside the agriculture mask ``g`` is
  modulated per rectangular field block.
* land pixels interpolate soil -> vegetation reflectance by ``g`` (soil
  has red > green; vegetation has high NIR), with a small per-class
  lithology tint.
* water pixels (elevation < sea_level) get a fixed dark signature with
  NIR strictly below red, darkened with depth.

Greenness is monotone nondecreasing in the precipitation channel, which
downstream counterfactual checks rely on.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataset import GENERATOR_VERSION, DatasetManifest, ManifestEntry
from .raster import IMAGERY_BANDS, RasterStack, write_raster_file
from .rng import Rng, grid_uniform, hash_string, hash_words

DEFAULT_PREDICTORS = (
    "elevation",
    "temperature_mean",
    "precipitation_annual",
    "precipitation_seasonality",
    "litho_a",
    "litho_b",
    "litho_c",
    "anthro_agriculture",
)

CORE_PREDICTORS = ("elevation", "temperature_mean", "precipitation_annual")
LITHO_PREDICTORS = ("litho_a", "litho_b", "litho_c")

LAT_BAND = (-56.0, 60.0)
WEST_LON = (-170.0, -30.0)

_N_LITHO_SITES = 6
_AGRI_BLOCK_W = 9
_AGRI_BLOCK_H = 7
_AGRI_SLOPE_MAX = 0.025
_AGRI_DISTRICT_MIN = 0.60
_AGRI_FIELD_SEED = hash_string("agriculture-blocks")

# (blue, green, red, nir) reflectance anchors of the imagery mapping
_SOIL = np.array([0.22, 0.28, 0.38, 0.30])
_VEG = np.array([0.06, 0.35, 0.08, 0.62])
_WATER = np.array([0.18, 0.14, 0.10, 0.035])
_LITHO_TINT = np.array(
    [
        [0.02, -0.01, 0.03, 0.00],
        [0.00, 0.02, -0.02, 0.02],
        [-0.02, -0.02, 0.00, -0.03],
    ]
)


@dataclass(frozen=True)
class WorldConfig:
    """Full description of a synthetic world; datasets are pure functions of it."""

    seed: int = 0
    n_samples: int = 16
    width: int = 64
    height: int = 64
    predictor_set: tuple[str, ...] = DEFAULT_PREDICTORS
    cell_size_m: float = 43.0
    noise_octaves: int = 4
    sea_level: float = 0.15
    latent_noise_weight: float = 0.25
    west_temperature_offset: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "predictor_set", tuple(self.predictor_set))
        if self.n_samples < 1:
            raise ValueError("n_samples must be >= 1")
        if self.width < 4 or self.height < 4:
            raise ValueError("width and height must be >= 4")
        if not 0.0 <= self.latent_noise_weight < 1.0:
            raise ValueError("latent_noise_weight must lie in [0, 1)")
        if self.noise_octaves < 1:
            raise ValueError("noise_octaves must be >= 1")
        missing = [n for n in CORE_PREDICTORS if n not in self.predictor_set]
        if missing:
            raise ValueError(f"predictor_set must include {missing}")
        if len(set(self.predictor_set)) != len(self.predictor_set):
            raise ValueError("predictor_set names must be unique")


def smoothstep(t: np.ndarray | float) -> np.ndarray | float:
    """Cubic smoothstep on [0, 1]: t^2 (3 - 2t)."""
    return t * t * (3.0 - 2.0 * t)


def value_noise(
    field_seed: int, width: int, height: int, octaves: int
) -> np.ndarray:
    """Multi-octave value noise in [0, 1), shape (height, width).

    Octave ``o`` uses amplitude ``0.5**o`` and frequency
    ``2**o * (4 / width)``; lattice values come from a stateless hash of
    (field_seed, o, ix, iy) and are blended bilinearly with smoothstep
    weights. Stateless hashing keeps the field random-access and
    byte-reproducible.
    """
    total = np.zeros((height, width), dtype=np.float64)
    amp_sum = 0.0
    xs = np.arange(width, dtype=np.float64)
    ys = np.arange(height, dtype=np.float64)
    for o in range(octaves):
        freq = (2.0**o) * 4.0 / width
        amp = 0.5**o
        u = xs * freq
        v = ys * freq
        ix0 = np.floor(u).astype(np.int64)
        iy0 = np.floor(v).astype(np.int64)
        wx = smoothstep(u - ix0)[np.newaxis, :]
        wy = smoothstep(v - iy0)[:, np.newaxis]
        oseed = hash_words(field_seed, o)
        ix0 = ix0[np.newaxis, :]
        iy0 = iy0[:, np.newaxis]
        g00 = grid_uniform(oseed, ix0, iy0)
        g10 = grid_uniform(oseed, ix0 + 1, iy0)
        g01 = grid_uniform(oseed, ix0, iy0 + 1)
        g11 = grid_uniform(oseed, ix0 + 1, iy0 + 1)
        octave_val = (
            g00 * (1 - wx) * (1 - wy)
            + g10 * wx * (1 - wy)
            + g01 * (1 - wx) * wy
            + g11 * wx * wy
        )
        total += amp * octave_val
        amp_sum += amp
    return total / amp_sum


def _field_seed(cfg: WorldConfig, sample_index: int, name: str) -> int:
    return hash_words(cfg.seed, sample_index, hash_string("field:" + name))


def region_for_lon(lon: float) -> str:
    return "west" if WEST_LON[0] <= lon <= WEST_LON[1] else "east"


def _litho_class(cfg: WorldConfig, sample_index: int) -> np.ndarray:
    """Voronoi lithology partition: per-pixel class id in {0, 1, 2}."""
    rng = Rng(_field_seed(cfg, sample_index, "litho"))
    sx = np.array([rng.uniform(0, cfg.width) for _ in range(_N_LITHO_SITES)])
    sy = np.array([rng.uniform(0, cfg.height) for _ in range(_N_LITHO_SITES)])
    site_class = np.arange(_N_LITHO_SITES) % 3
    xs = np.arange(cfg.width, dtype=np.float64)[np.newaxis, :, np.newaxis]
    ys = np.arange(cfg.height, dtype=np.float64)[:, np.newaxis, np.newaxis]
    d2 = (xs - sx) ** 2 + (ys - sy) ** 2
    nearest = np.argmin(d2, axis=2)
    return site_class[nearest]


def _agri_pattern(width: int, height: int) -> np.ndarray:
    """Rectangular field blocks separated by one-cell gap lines."""
    xs = np.arange(width)[np.newaxis, :]
    ys = np.arange(height)[:, np.newaxis]
    return (xs % _AGRI_BLOCK_W < _AGRI_BLOCK_W - 1) & (
        ys % _AGRI_BLOCK_H < _AGRI_BLOCK_H - 1
    )


def _agri_block_modulation(width: int, height: int) -> np.ndarray:
    """Per-block greenness factor in [0.55, 1.0] from a fixed world grid."""
    bx = np.arange(width)[np.newaxis, :] // _AGRI_BLOCK_W
    by = np.arange(height)[:, np.newaxis] // _AGRI_BLOCK_H
    u = grid_uniform(_AGRI_FIELD_SEED, bx, by)
    return 0.55 + 0.45 * u


def gen_conditions(
    cfg: WorldConfig, sample_index: int
) -> tuple[float, float, str, RasterStack]:
    """Generate one sample's location, region tag and predictor stack.

    Pure function of (cfg.seed, sample_index). Temperature decreases
    with elevation (fixed lapse term) and with |lat|; lithology channels
    form a one-hot partition; the agriculture mask is a rectangular
    block pattern gated by low elevation gradient on land.
    """
    if not 0 <= sample_index < cfg.n_samples:
        raise IndexError(
            f"sample_index {sample_index} out of range [0, {cfg.n_samples})"
        )
    srng = Rng(hash_words(cfg.seed, sample_index, hash_string("sample")))
    lat = srng.uniform(*LAT_BAND)
    lon = srng.uniform(-180.0, 180.0)
    region = region_for_lon(lon)
    elev_base = 0.15 + 0.75 * srng.next_float()
    temp_base = 0.25 + 0.6 * srng.next_float() - 0.25 * abs(lat) / 60.0
    prec_base = -0.15 + 1.1 * srng.next_float()

    h, w = cfg.height, cfg.width

    def noise(name: str) -> np.ndarray:
        return value_noise(_field_seed(cfg, sample_index, name), w, h, cfg.noise_octaves)

    elevation = elev_base + 0.8 * (noise("elevation") - 0.5)
    temperature = (
        temp_base + 0.25 * (noise("temperature") - 0.5) - 0.35 * elevation
    )
    if region == "west":
        temperature = temperature + cfg.west_temperature_offset
    precipitation = prec_base + 0.5 * (noise("precipitation") - 0.5)

    litho = _litho_class(cfg, sample_index)
    gy, gx = np.gradient(elevation)
    flat = np.hypot(gx, gy) < _AGRI_SLOPE_MAX
    district = noise("agri_district") > _AGRI_DISTRICT_MIN
    agri = (
        _agri_pattern(w, h) & flat & district & (elevation >= cfg.sea_level)
    ).astype(np.float64)

    channels = []
    for name in cfg.predictor_set:
        if name == "elevation":
            channels.append(elevation)
        elif name == "temperature_mean":
            channels.append(temperature)
        elif name == "precipitation_annual":
            channels.append(precipitation)
        elif name == "precipitation_seasonality":
            channels.append(noise("seasonality"))
        elif name in LITHO_PREDICTORS:
            channels.append((litho == LITHO_PREDICTORS.index(name)).astype(np.float64))
        elif name == "anthro_agriculture":
            channels.append(agri)
        else:
            channels.append(noise(name))
    stack = RasterStack.from_array(
        cfg.predictor_set, np.stack(channels), cfg.cell_size_m
    )
    return lat, lon, region, stack


def gen_imagery(
    conditions: RasterStack, cfg: WorldConfig, latent_seed: int
) -> RasterStack:
    """Render 4-band imagery in [0, 1] from a conditions stack.

    With ``latent_noise_weight == 0`` the output is a pure function of
    the conditions; otherwise a latent value-noise field keyed by
    ``latent_seed`` perturbs the greenness blend.
    """
    if tuple(conditions.channel_names) != cfg.predictor_set:
        raise ValueError(
            f"conditions channels {conditions.channel_names} do not match "
            f"predictor_set {cfg.predictor_set}"
        )
    h, w = conditions.height, conditions.width
    elevation = conditions.channel("elevation").astype(np.float64)
    temp_n = np.clip(conditions.channel("temperature_mean").astype(np.float64), 0, 1)
    prec_n = np.clip(
        conditions.channel("precipitation_annual").astype(np.float64), 0, 1
    )

    g = smoothstep(prec_n) * smoothstep(np.clip(1.0 - 2.0 * np.abs(temp_n - 0.45), 0, 1))
    weight = cfg.latent_noise_weight
    if weight > 0.0:
        latent = value_noise(
            hash_words(latent_seed, hash_string("latent-field")),
            w,
            h,
            cfg.noise_octaves,
        )
        g = (1.0 - weight) * g + weight * latent
    if "anthro_agriculture" in conditions.channel_names:
        agri = conditions.channel("anthro_agriculture") > 0.5
        g = np.where(agri, g * _agri_block_modulation(w, h), g)
    g = np.clip(g, 0.0, 1.0)

    bands = _SOIL[:, None, None] + (_VEG - _SOIL)[:, None, None] * g[None, :, :]
    if all(n in conditions.channel_names for n in LITHO_PREDICTORS):
        tint = np.zeros((4, h, w))
        for i, name in enumerate(LITHO_PREDICTORS):
            mask = conditions.channel(name) > 0.5
            tint += _LITHO_TINT[i][:, None, None] * mask[None, :, :]
        # tint fades out as vegetation takes over bare soil
        bands = bands + tint * (1.0 - g)[None, :, :]

    water = elevation < cfg.sea_level
    if np.any(water):
        depth = np.clip(
            (cfg.sea_level - elevation) / max(abs(cfg.sea_level), 1e-9), 0.0, 1.0
        )
        factor = 1.0 - 0.35 * depth
        water_bands = _WATER[:, None, None] * factor[None, :, :]
        bands = np.where(water[None, :, :], water_bands, bands)

    bands = np.clip(bands, 0.0, 1.0)
    return RasterStack.from_array(IMAGERY_BANDS, bands, conditions.cell_size_m)


def latent_seed_for(cfg: WorldConfig, sample_index: int) -> int:
    return hash_words(cfg.seed, sample_index, hash_string("latent"))


def sample_id_for(sample_index: int) -> str:
    return f"s{sample_index:05d}"


def gen_dataset(cfg: WorldConfig, out_dir: str | Path) -> DatasetManifest:
    """Materialize the whole dataset (LSCP pairs + manifest) under out_dir."""
    out_dir = Path(out_dir)
    (out_dir / "samples").mkdir(parents=True, exist_ok=True)
    entries = []
    for i in range(cfg.n_samples):
        lat, lon, region, conditions = gen_conditions(cfg, i)
        imagery = gen_imagery(conditions, cfg, latent_seed_for(cfg, i))
        sid = sample_id_for(i)
        cond_path = f"samples/{sid}_cond.lscp"
        img_path = f"samples/{sid}_img.lscp"
        write_raster_file(conditions, out_dir / cond_path)
        write_raster_file(imagery, out_dir / img_path)
        entries.append(
            ManifestEntry(
                id=sid,
                lat=lat,
                lon=lon,
                region=region,
                conditions_path=cond_path,
                imagery_path=img_path,
            )
        )
    manifest = DatasetManifest(
        root=out_dir,
        seed=cfg.seed,
        cell_size_m=cfg.cell_size_m,
        predictor_names=cfg.predictor_set,
        n_samples=cfg.n_samples,
        entries=entries,
        generator_version=GENERATOR_VERSION,
    )
    manifest.save()
    return manifest
