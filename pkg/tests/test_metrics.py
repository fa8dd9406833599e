import math

import numpy as np
import pytest

import oracles
from landkit.metrics import (
    LandscapeMetrics,
    MetricConfig,
    Patch,
    PatchTable,
    cohesion,
    compute_all,
    connectance,
    frac_mn,
    label_patches,
    mesh,
    ndvi_mean,
    read_metrics_csv,
    shdi,
    write_metrics_csv,
    MetricsRow,
)
from landkit.raster import IMAGERY_BANDS, RasterStack
from landkit.rng import Rng
from landkit.segmentation import ClassRaster, KMeansModel


def class_raster(labels, k=None):
    labels = np.asarray(labels, dtype=np.int32)
    if k is None:
        k = int(labels.max()) + 1
    return ClassRaster(width=labels.shape[1], height=labels.shape[0], k=k, labels=labels)


def manual_table(specs, total_cells, cell_size_m=1.0):
    """PatchTable from (class_id, area, perimeter) triples; no geometry."""
    patches = tuple(
        Patch(
            patch_id=i,
            class_id=c,
            area_cells=a,
            perimeter_edges=p,
            cells=np.zeros((a, 2), dtype=np.int32),
        )
        for i, (c, a, p) in enumerate(specs)
    )
    return PatchTable(
        patches=patches, total_cells=total_cells, cell_size_m=cell_size_m,
        width=total_cells, height=1,
    )


class TestLabelPatches:
    def test_diagonal_adjacency(self):
        labels = [[1, 0, 0], [0, 1, 0], [0, 0, 0]]
        pt8 = label_patches(class_raster(labels), connectivity=8)
        pt4 = label_patches(class_raster(labels), connectivity=4)
        a_patches8 = [p for p in pt8.patches if p.class_id == 1]
        a_patches4 = [p for p in pt4.patches if p.class_id == 1]
        assert len(a_patches8) == 1
        assert len(a_patches4) == 2

    def test_uniform_raster(self):
        n = 5
        pt = label_patches(class_raster(np.zeros((n, n), dtype=int), k=1))
        assert len(pt.patches) == 1
        assert pt.patches[0].area_cells == n * n
        assert pt.patches[0].perimeter_edges == 4 * n

    def test_checkerboard(self):
        labels = [[0, 1], [1, 0]]
        pt = label_patches(class_raster(labels), connectivity=4)
        assert len(pt.patches) == 4
        for p in pt.patches:
            assert p.area_cells == 1
            assert p.perimeter_edges == 4

    def test_patch_ids_in_scan_order(self):
        labels = [[2, 2, 0], [1, 1, 0], [1, 1, 0]]
        pt = label_patches(class_raster(labels), connectivity=4)
        first_cells = [tuple(p.cells[0]) for p in pt.patches]
        # patch 0 starts at (0,0), patch 1 at (0,2), patch 2 at (1,0)
        assert first_cells == [(0, 0), (0, 2), (1, 0)]
        assert [p.patch_id for p in pt.patches] == [0, 1, 2]

    def test_area_partition_property(self):
        rng = Rng(17)
        for _ in range(10):
            h = 3 + rng.below(10)
            w = 3 + rng.below(10)
            labels = np.array(
                [[rng.below(4) for _ in range(w)] for _ in range(h)], dtype=np.int32
            )
            pt = label_patches(class_raster(labels, k=4))
            assert sum(p.area_cells for p in pt.patches) == h * w
            for p in pt.patches:
                assert 4 <= p.perimeter_edges <= 4 * p.area_cells + 4

    def test_boundary_edges_total(self):
        rng = Rng(23)
        h, w = 7, 9
        labels = np.array(
            [[rng.below(3) for _ in range(w)] for _ in range(h)], dtype=np.int32
        )
        pt = label_patches(class_raster(labels, k=3))
        # count boundary-facing edges independently: every border cell
        # contributes one edge per side touching the boundary
        boundary_edges = 2 * (w + h)
        total_perim = sum(p.perimeter_edges for p in pt.patches)
        interior_pairs = 0
        for r in range(h):
            for c in range(w):
                if r + 1 < h and labels[r + 1, c] != labels[r, c]:
                    interior_pairs += 1
                if c + 1 < w and labels[r, c + 1] != labels[r, c]:
                    interior_pairs += 1
        assert total_perim == boundary_edges + 2 * interior_pairs


class TestShdi:
    def test_single_class(self):
        pt = label_patches(class_raster(np.zeros((4, 4), dtype=int), k=1))
        assert shdi(pt) == 0.0

    def test_even_split(self):
        labels = np.zeros((4, 4), dtype=int)
        labels[:, 2:] = 1
        pt = label_patches(class_raster(labels))
        assert shdi(pt) == pytest.approx(math.log(2), abs=1e-12)

    def test_75_25(self):
        labels = np.zeros((4, 4), dtype=int)
        labels[3, :] = 1
        pt = label_patches(class_raster(labels))
        expected = -(0.75 * math.log(0.75) + 0.25 * math.log(0.25))
        assert shdi(pt) == pytest.approx(expected, abs=1e-12)
        assert shdi(pt) == pytest.approx(0.562335, abs=1e-6)


class TestCohesion:
    def test_full_landscape_patch(self):
        pt = label_patches(class_raster(np.zeros((6, 6), dtype=int), k=1))
        assert cohesion(pt) == pytest.approx(100.0, abs=1e-12)

    def test_all_single_cells(self):
        labels = np.indices((4, 4)).sum(axis=0) % 2
        pt = label_patches(class_raster(labels), connectivity=4)
        assert cohesion(pt) == pytest.approx(0.0, abs=1e-12)

    def test_two_patch_hand_value(self):
        labels = np.zeros((4, 4), dtype=int)
        labels[:2, :2] = 1
        pt = label_patches(class_raster(labels))
        areas = sorted(p.area_cells for p in pt.patches)
        perims = sorted(p.perimeter_edges for p in pt.patches)
        assert areas == [4, 12] and perims == [8, 16]
        expected = (
            100.0
            * (1.0 - (16 + 8) / (16 * math.sqrt(12) + 8 * math.sqrt(4)))
            / (1.0 - 1.0 / math.sqrt(16))
        )
        assert cohesion(pt) == pytest.approx(expected, rel=1e-12)

    def test_single_cell_landscape_is_na(self):
        pt = label_patches(class_raster(np.zeros((1, 1), dtype=int), k=1))
        assert cohesion(pt) is None


class TestConnectance:
    def test_all_singleton_classes(self):
        labels = np.zeros((3, 3), dtype=int)
        labels[1, 1] = 1
        pt = label_patches(class_raster(labels))
        assert connectance(pt, 5.0) is None

    def test_two_close_patches(self):
        labels = np.zeros((2, 3), dtype=int)
        labels[0, 0] = 1
        labels[0, 2] = 1
        pt = label_patches(class_raster(labels), connectivity=4)
        # background is one connected patch; class 1 has two patches 2 apart
        assert connectance(pt, 5.0) == pytest.approx(100.0)

    def test_two_of_three_pairs_joined(self):
        labels = np.zeros((2, 9), dtype=int)
        labels[0, 0] = labels[0, 4] = labels[0, 8] = 1
        pt = label_patches(class_raster(labels), connectivity=8)
        ones = [p for p in pt.patches if p.class_id == 1]
        zeros = [p for p in pt.patches if p.class_id == 0]
        assert len(ones) == 3 and len(zeros) == 1
        assert connectance(pt, 5.0) == pytest.approx(100.0 * 2 / 3, abs=1e-9)

    def test_threshold_is_inclusive(self):
        labels = np.zeros((1, 6), dtype=int)
        labels[0, 0] = labels[0, 5] = 1
        # distance exactly 5.0 between the two class-1 cells
        pt = label_patches(class_raster(labels), connectivity=8)
        ones = [p for p in pt.patches if p.class_id == 1]
        if len(ones) == 2:
            assert connectance(pt, 5.0) == pytest.approx(
                oracles.connectance_ref(
                    oracles.flood_fill_patches(labels, 8), 5.0
                )
            )


class TestFracMn:
    def test_single_cell_exact_one(self):
        for cell in (43.0, 7.5, 0.5):
            pt = label_patches(class_raster(np.zeros((1, 2), dtype=int), k=1), cell_size_m=cell)
            sub = manual_table([(0, 1, 4)], total_cells=1, cell_size_m=cell)
            assert frac_mn(sub) == pytest.approx(1.0, abs=1e-12)

    def test_square_patch_exact_one(self):
        pt = label_patches(class_raster(np.zeros((5, 5), dtype=int), k=1), cell_size_m=43.0)
        assert frac_mn(pt) == pytest.approx(1.0, abs=1e-12)

    def test_strip_hand_value(self):
        labels = np.zeros((3, 8), dtype=int)
        labels[1, :] = 1
        pt = label_patches(class_raster(labels), cell_size_m=43.0)
        strip = [p for p in pt.patches if p.class_id == 1][0]
        assert strip.area_cells == 8 and strip.perimeter_edges == 18
        expected = 2.0 * math.log(0.25 * 18 * 43.0) / math.log(8 * 43.0**2)
        sub = manual_table([(0, 8, 18)], total_cells=24, cell_size_m=43.0)
        assert frac_mn(sub) == pytest.approx(expected, rel=1e-12)

    def test_unit_area_exclusion(self):
        # cell size 1: single-cell patches have ln(a) = 0 and are excluded
        pt = manual_table([(0, 1, 4), (1, 4, 8)], total_cells=5, cell_size_m=1.0)
        expected = 2.0 * math.log(0.25 * 8) / math.log(4)
        assert frac_mn(pt) == pytest.approx(expected, rel=1e-12)
        only_units = manual_table([(0, 1, 4)], total_cells=1, cell_size_m=1.0)
        assert frac_mn(only_units) is None


class TestMesh:
    def test_single_patch_total_area(self):
        pt = label_patches(class_raster(np.zeros((10, 10), dtype=int), k=1), cell_size_m=100.0)
        assert mesh(pt) == pytest.approx(100.0, rel=1e-12)  # 1e6 m2 == 100 ha

    def test_60_40_hand_value(self):
        labels = np.zeros((10, 10), dtype=int)
        labels[6:, :] = 1
        pt = label_patches(class_raster(labels), cell_size_m=100.0)
        assert mesh(pt) == pytest.approx(52.0, rel=1e-12)

    def test_all_single_cells(self):
        labels = np.indices((4, 4)).sum(axis=0) % 2
        pt = label_patches(class_raster(labels), connectivity=4, cell_size_m=30.0)
        assert mesh(pt) == pytest.approx(30.0 * 30.0 / 10_000.0, rel=1e-12)


class TestNdvi:
    def test_nir_equals_red(self):
        img = RasterStack.from_array(IMAGERY_BANDS, np.full((4, 3, 3), 0.4))
        assert ndvi_mean(img) == 0.0

    def test_pure_vegetation_signal(self):
        bands = np.zeros((4, 2, 2))
        bands[3] = 1.0
        img = RasterStack.from_array(IMAGERY_BANDS, bands)
        assert ndvi_mean(img) == 1.0

    def test_ratio(self):
        bands = np.zeros((4, 2, 2))
        bands[2] = 0.2
        bands[3] = 0.6
        img = RasterStack.from_array(IMAGERY_BANDS, bands)
        assert ndvi_mean(img) == pytest.approx(0.5, abs=1e-7)

    def test_undefined_pixels_excluded(self):
        bands = np.zeros((4, 1, 2))
        bands[2, 0, 0] = 0.5
        bands[3, 0, 0] = 0.5
        img = RasterStack.from_array(IMAGERY_BANDS, bands)
        assert ndvi_mean(img) == pytest.approx(0.0)
        assert ndvi_mean(RasterStack.from_array(IMAGERY_BANDS, np.zeros((4, 1, 1)))) is None


def constant_model(value=0.5):
    """k=2 model whose first centroid matches the constant image exactly."""
    return KMeansModel(
        k=2,
        centroids=np.array([[value] * 4, [99.0] * 4]),
        seed=0,
        iterations_run=0,
        inertia=0.0,
    )


class TestComputeAll:
    def test_uniform_imagery(self):
        img = RasterStack.from_array(IMAGERY_BANDS, np.full((4, 6, 6), 0.5), cell_size_m=100.0)
        m = compute_all(img, constant_model(), MetricConfig())
        assert m.shdi == 0.0
        assert m.cohesion == pytest.approx(100.0)
        assert m.connect is None
        assert m.frac_mn == pytest.approx(1.0)
        assert m.mesh_ha == pytest.approx(36 * 1e4 / 1e4)
        assert m.ndvi_mean == 0.0

    def test_identical_inputs_identical_outputs(self, small_world):
        manifest, _ = small_world
        img = manifest.load_imagery(manifest.ids()[0])
        from landkit.segmentation import fit_kmeans, sample_pixels

        model = fit_kmeans(sample_pixels(manifest, None, 300, 5, seed=2), 6, seed=2)
        a = compute_all(img, model)
        b = compute_all(img, model)
        assert a == b

    def test_matches_brute_force_pipeline(self, small_world):
        manifest, _ = small_world
        from landkit.segmentation import assign, fit_kmeans, sample_pixels

        model = fit_kmeans(sample_pixels(manifest, None, 400, 6, seed=4), 5, seed=4)
        img = manifest.load_imagery(manifest.ids()[3])
        cfg = MetricConfig()
        got = compute_all(img, model, cfg)
        cr = assign(model, img)
        patches = oracles.flood_fill_patches(cr.labels.tolist(), cfg.connectivity)
        total = cr.width * cr.height
        assert got.shdi == pytest.approx(oracles.shdi_ref(patches, total), rel=1e-12)
        assert got.cohesion == pytest.approx(oracles.cohesion_ref(patches, total), rel=1e-12)
        ref_connect = oracles.connectance_ref(patches, cfg.threshold_cells)
        if ref_connect is None:
            assert got.connect is None
        else:
            assert got.connect == pytest.approx(ref_connect, rel=1e-12)
        assert got.frac_mn == pytest.approx(
            oracles.frac_mn_ref(patches, img.cell_size_m), rel=1e-12
        )
        assert got.mesh_ha == pytest.approx(
            oracles.mesh_ref(patches, total, img.cell_size_m), rel=1e-12
        )
        assert got.ndvi_mean == pytest.approx(
            oracles.ndvi_ref(img.channel("nir"), img.channel("red")), rel=1e-12
        )


def test_class_id_permutation_invariance():
    rng = Rng(31)
    labels = np.array([[rng.below(4) for _ in range(12)] for _ in range(12)])
    relabeled = (labels + 2) % 4  # permutation of class ids
    cfg = MetricConfig()
    pt_a = label_patches(class_raster(labels, k=4), cell_size_m=43.0)
    pt_b = label_patches(class_raster(relabeled, k=4), cell_size_m=43.0)
    assert shdi(pt_a) == pytest.approx(shdi(pt_b), rel=1e-12)
    assert cohesion(pt_a) == pytest.approx(cohesion(pt_b), rel=1e-12)
    assert mesh(pt_a) == pytest.approx(mesh(pt_b), rel=1e-12)
    assert frac_mn(pt_a) == pytest.approx(frac_mn(pt_b), rel=1e-12)
    ca, cb = connectance(pt_a, 5.0), connectance(pt_b, 5.0)
    assert (ca is None) == (cb is None)
    if ca is not None:
        assert ca == pytest.approx(cb, rel=1e-12)


def test_metrics_csv_roundtrip(tmp_path):
    cfg = MetricConfig()
    rows = [
        MetricsRow(
            sample_id="s1", source="target", model_name="", k=8, replicate=0,
            shdi=1.25, cohesion=98.5, connect=None, frac_mn=1.04,
            mesh_ha=12.5, ndvi_mean=0.31, threshold_cells=5.0, connectivity=8,
        ),
        MetricsRow(
            sample_id="s1", source="generated", model_name="fc", k=8, replicate=0,
            shdi=1.11, cohesion=97.0, connect=44.4, frac_mn=1.06,
            mesh_ha=10.0, ndvi_mean=None, threshold_cells=5.0, connectivity=8,
        ),
    ]
    path = tmp_path / "metrics.csv"
    write_metrics_csv(rows, path)
    text = path.read_text()
    assert "connect" in text.splitlines()[0]
    assert read_metrics_csv(path) == rows
