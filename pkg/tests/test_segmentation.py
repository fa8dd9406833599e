import numpy as np
import pytest

from landkit.raster import IMAGERY_BANDS, RasterStack
from landkit.rng import Rng
from landkit.segmentation import (
    ClassRaster,
    KMeansModel,
    assign,
    fit_kmeans,
    sample_pixels,
)


class TestSamplePixels:
    def test_rows_come_from_the_image(self, small_world):
        manifest, _ = small_world
        first_id = manifest.ids()[0]
        rows = sample_pixels(manifest, None, 10, 1, seed=3, ids=[first_id])
        assert rows.shape == (10, 4)
        stack = manifest.load_imagery(first_id)
        pixel_set = {tuple(v) for v in stack.data.reshape(4, -1).T.tolist()}
        for row in rows.tolist():
            assert tuple(np.float32(v) for v in row) in pixel_set

    def test_deterministic(self, small_world):
        manifest, _ = small_world
        a = sample_pixels(manifest, None, 50, 4, seed=9)
        b = sample_pixels(manifest, None, 50, 4, seed=9)
        assert np.array_equal(a, b)

    def test_too_many_images(self, small_world):
        manifest, _ = small_world
        with pytest.raises(ValueError, match="n_images"):
            sample_pixels(manifest, None, 10, len(manifest) + 1, seed=0)

    def test_too_many_pixels(self, small_world):
        manifest, _ = small_world
        with pytest.raises(ValueError, match="n_pixels"):
            sample_pixels(manifest, None, 32 * 32 + 1, 1, seed=0)


def jittered_blobs(n_per_blob=100, seed=0):
    rng = Rng(seed)
    rows = []
    for center in (0.0, 10.0):
        for _ in range(n_per_blob):
            rows.append([center + (rng.next_float() - 0.5) * 0.2 for _ in range(4)])
    return np.array(rows)


class TestFitKmeans:
    def test_single_cluster_of_identical_pixels(self):
        pixels = np.tile([0.25, 0.5, 0.75, 1.0], (20, 1))
        model = fit_kmeans(pixels, k=1, seed=0)
        assert np.allclose(model.centroids[0], [0.25, 0.5, 0.75, 1.0])
        assert model.inertia == 0.0

    def test_two_blobs(self):
        pixels = jittered_blobs()
        model = fit_kmeans(pixels, k=2, seed=1)
        got = sorted(model.centroids[:, 0])
        blob_means = [pixels[:100].mean(axis=0), pixels[100:].mean(axis=0)]
        assert abs(got[0] - blob_means[0][0]) < 0.1
        assert abs(got[1] - blob_means[1][0]) < 0.1

    def test_k_exceeds_distinct_pixels(self):
        pixels = np.array([[0.0] * 4, [1.0] * 4, [2.0] * 4] * 5)
        with pytest.raises(ValueError, match="distinct"):
            fit_kmeans(pixels, k=5, seed=0)

    def test_inertia_monotone_nonincreasing(self):
        rng = Rng(7)
        pixels = rng.next_floats(400 * 4).reshape(400, 4)
        model = fit_kmeans(pixels, k=6, seed=7)
        hist = model.inertia_history
        assert len(hist) >= 2
        assert all(b <= a + 1e-9 for a, b in zip(hist, hist[1:]))

    def test_deterministic(self):
        pixels = jittered_blobs(seed=5)
        a = fit_kmeans(pixels, k=3, seed=2)
        b = fit_kmeans(pixels, k=3, seed=2)
        assert np.array_equal(a.centroids, b.centroids)
        assert a.inertia == b.inertia

    def test_save_load_roundtrip(self, tmp_path):
        model = fit_kmeans(jittered_blobs(), k=2, seed=0)
        model.save(tmp_path / "kmeans.json")
        back = KMeansModel.load(tmp_path / "kmeans.json")
        assert back.k == model.k
        assert np.array_equal(back.centroids, model.centroids)
        assert back.inertia == model.inertia
        assert back.iterations_run == model.iterations_run


def model_from_centroids(centroids):
    return KMeansModel(
        k=len(centroids),
        centroids=np.asarray(centroids, dtype=np.float64),
        seed=0,
        iterations_run=0,
        inertia=0.0,
    )


class TestAssign:
    def test_pixels_at_centroids(self):
        centroids = [[0, 0, 0, 0], [1, 1, 1, 1], [2, 2, 2, 2]]
        model = model_from_centroids(centroids)
        img = RasterStack.from_array(IMAGERY_BANDS, np.ones((4, 3, 3)) * 1.0)
        cr = assign(model, img)
        assert np.all(cr.labels == 1)

    def test_idempotent(self, small_world):
        manifest, _ = small_world
        stack = manifest.load_imagery(manifest.ids()[0])
        pixels = sample_pixels(manifest, None, 200, 4, seed=1)
        model = fit_kmeans(pixels, k=4, seed=1)
        a = assign(model, stack)
        b = assign(model, stack)
        assert np.array_equal(a.labels, b.labels)

    def test_tie_goes_to_lowest_index(self):
        centroids = [
            [5.0, 5.0, 5.0, 5.0],
            [0.0, 0.0, 0.0, 2.0],
            [9.0, 9.0, 9.0, 9.0],
            [0.0, 0.0, 2.0, 0.0],
        ]
        model = model_from_centroids(centroids)
        pixel = np.array([0.0, 0.0, 1.0, 1.0])  # equidistant to centroids 1 and 3
        img = RasterStack.from_array(
            IMAGERY_BANDS, np.tile(pixel[:, None, None], (1, 1, 1))
        )
        assert assign(model, img).labels[0, 0] == 1

    def test_band_count_mismatch(self):
        model = model_from_centroids([[0.0, 0.0]])
        img = RasterStack.from_array(IMAGERY_BANDS, np.zeros((4, 2, 2)))
        with pytest.raises(ValueError, match="bands"):
            assign(model, img)

    def test_minimum_distance_property(self):
        rng = Rng(3)
        pixels = rng.next_floats(300 * 4).reshape(300, 4)
        model = fit_kmeans(pixels, k=5, seed=3)
        img = RasterStack.from_array(
            IMAGERY_BANDS, pixels[:256].T.reshape(4, 16, 16)
        )
        cr = assign(model, img)
        flat = img.data.reshape(4, -1).T
        d2 = ((flat[:, None, :] - model.centroids[None]) ** 2).sum(axis=2)
        chosen = d2[np.arange(256), cr.labels.ravel()]
        assert np.all(chosen <= d2.min(axis=1) + 1e-12)


def test_class_raster_rejects_out_of_range_labels():
    with pytest.raises(ValueError):
        ClassRaster(width=2, height=1, k=2, labels=np.array([[0, 5]]))
