import numpy as np
import pytest
from helpers_shapes import make_box
from hypothesis import given, settings
from hypothesis import strategies as st

from cadsketch.errors import DimensionMismatch, ImageTooSmall, InvalidParams
from cadsketch.mesh_io import normalize_mesh
from cadsketch.sketch import (OP_CANNY, OP_PREWITT, OP_ROBERTS, OP_SCHARR,
                              OP_SOBEL, SketchParams, binary_threshold, canny,
                              dodge_divide, edge_gradient, gaussian_blur,
                              generate_sketch, invert)
from cadsketch.view_render import dodecahedron_viewpoints, render_view


def neighbor_counts(edges):
    mask = edges > 0
    padded = np.pad(mask, 1)
    h, w = mask.shape
    counts = np.zeros_like(mask, dtype=int)
    for dy in (-1, 0, 1):
        for dx in (-1, 0, 1):
            if dy == 0 and dx == 0:
                continue
            counts += padded[1 + dy:1 + dy + h, 1 + dx:1 + dx + w]
    return counts, mask


@pytest.fixture(scope="module")
def square_image():
    img = np.zeros((256, 256), np.uint8)
    img[78:178, 78:178] = 255
    return img


class TestGaussianBlur:
    def test_constant_unchanged(self):
        img = np.full((32, 32), 100, np.uint8)
        np.testing.assert_array_equal(gaussian_blur(img, 5, 1.0), img)

    def test_impulse_center_weight(self):
        # analytic 5x5 sigma=1 kernel: the center holds ~16.2% of the mass
        x = np.arange(5) - 2.0
        g1 = np.exp(-x * x / 2.0)
        g1 /= g1.sum()
        expected_center = g1[2] ** 2
        assert expected_center == pytest.approx(0.162, abs=5e-4)

        img = np.zeros((11, 11), np.uint8)
        img[5, 5] = 255
        out = gaussian_blur(img, 5, 1.0)
        assert out[5, 5] == round(255 * expected_center)

    def test_even_kernel_rejected(self):
        with pytest.raises(InvalidParams):
            gaussian_blur(np.zeros((8, 8), np.uint8), 2, 1.0)

    def test_non_positive_sigma_rejected(self):
        with pytest.raises(InvalidParams):
            gaussian_blur(np.zeros((8, 8), np.uint8), 5, 0.0)


class TestInvert:
    def test_all_zero(self):
        img = np.zeros((4, 4), np.uint8)
        assert (invert(img) == 255).all()

    def test_involution(self):
        rng = np.random.default_rng(0)
        img = rng.integers(0, 256, (16, 16), dtype=np.uint8)
        np.testing.assert_array_equal(invert(invert(img)), img)

    def test_single_value(self):
        img = np.full((2, 2), 100, np.uint8)
        assert (invert(img) == 155).all()


class TestDodgeDivide:
    def test_white_over_unblurred_white_saturates(self):
        g = np.full((4, 4), 255, np.uint8)
        ib = np.zeros((4, 4), np.uint8)
        assert (dodge_divide(g, ib, 256.0) == 255).all()

    def test_zero_numerator(self):
        g = np.zeros((4, 4), np.uint8)
        ib = np.full((4, 4), 70, np.uint8)
        assert (dodge_divide(g, ib, 256.0) == 0).all()

    def test_midtone_clamps(self):
        g = np.full((4, 4), 128, np.uint8)
        ib = np.full((4, 4), 128, np.uint8)
        # 128 * 256 / (255 - 128 + 1) = 256 -> clamped to 255
        assert (dodge_divide(g, ib, 256.0) == 255).all()

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            dodge_divide(np.zeros((4, 4), np.uint8), np.zeros((5, 4), np.uint8))


class TestBinaryThreshold:
    def test_checkerboard_unchanged_at_127(self):
        img = np.indices((8, 8)).sum(axis=0) % 2 * 255
        img = img.astype(np.uint8)
        np.testing.assert_array_equal(binary_threshold(img, 127), img)

    def test_t255_all_zero(self):
        img = np.full((8, 8), 255, np.uint8)
        assert (binary_threshold(img, 255) == 0).all()

    def test_t0_all_white_when_no_zeros(self):
        img = np.full((8, 8), 1, np.uint8)
        assert (binary_threshold(img, 0) == 255).all()


class TestEdgeGradient:
    def test_constant_zero_magnitude(self):
        img = np.full((16, 16), 80, np.uint8)
        for op in (OP_SOBEL, OP_SCHARR, OP_PREWITT, OP_ROBERTS):
            mag, _ = edge_gradient(img, op)
            assert (mag == 0).all()

    @pytest.mark.parametrize("op,expected", [
        (OP_SOBEL, 1020.0),    # (1+2+1) * 255
        (OP_PREWITT, 765.0),   # (1+1+1) * 255
        (OP_SCHARR, 4080.0),   # (3+10+3) * 255
    ])
    def test_vertical_step_response(self, op, expected):
        img = np.zeros((16, 16), np.uint8)
        img[:, 8:] = 255
        mag, orient = edge_gradient(img, op)
        # interior rows at the two columns flanking the step
        assert mag[8, 7] == pytest.approx(expected)
        assert mag[8, 8] == pytest.approx(expected)
        assert orient[8, 7] == pytest.approx(0.0)  # gy = 0, gx > 0

    def test_roberts_diagonal(self):
        img = np.zeros((8, 8), np.uint8)
        img[4:, :] = 255   # horizontal step
        mag, _ = edge_gradient(img, OP_ROBERTS)
        assert mag[3, 3] == pytest.approx(255.0 * np.sqrt(2.0))

    def test_too_small(self):
        with pytest.raises(ImageTooSmall):
            edge_gradient(np.zeros((2, 2), np.uint8), OP_SOBEL)
        with pytest.raises(ImageTooSmall):
            edge_gradient(np.zeros((1, 1), np.uint8), OP_ROBERTS)


class TestCanny:
    def test_constant_image_no_edges(self):
        img = np.full((64, 64), 90, np.uint8)
        assert (canny(img, 50, 150) == 0).all()

    def test_square_ring_topology(self, square_image):
        edges = canny(square_image, 50, 150, nms=True)
        counts, mask = neighbor_counts(edges)
        assert mask.any()
        assert (counts[mask] == 2).all()

    def test_nms_off_strictly_more_pixels(self, square_image):
        on = np.count_nonzero(canny(square_image, 50, 150, nms=True))
        off = np.count_nonzero(canny(square_image, 50, 150, nms=False))
        assert off > on

    def test_high_threshold_monotonicity(self, square_image):
        counts = [np.count_nonzero(canny(square_image, 50, high))
                  for high in (80, 150, 300, 600, 1019)]
        assert all(a >= b for a, b in zip(counts, counts[1:]))

    def test_low_above_high_rejected(self):
        with pytest.raises(InvalidParams):
            canny(np.zeros((8, 8), np.uint8), 200, 100)


@pytest.fixture(scope="module")
def rendered_view():
    mesh = normalize_mesh(make_box(1.0, 0.7, 0.45))
    return render_view(mesh, dodecahedron_viewpoints()[2])


class TestGenerateSketch:
    def test_w1_equals_dodge_branch(self, rendered_view):
        params = SketchParams(blend_weight_o1=1.0)
        out = generate_sketch(rendered_view, params)
        blurred = gaussian_blur(invert(rendered_view), params.gaussian_kernel,
                                params.gaussian_sigma)
        o1 = binary_threshold(dodge_divide(rendered_view, blurred, params.dodge_scale),
                              params.binary_threshold)
        np.testing.assert_array_equal(out, o1)

    def test_w0_equals_inverted_edge_map(self, rendered_view):
        params = SketchParams(blend_weight_o1=0.0)
        out = generate_sketch(rendered_view, params)
        o2 = canny(rendered_view, params.canny_low, params.canny_high,
                   params.nms_enabled)
        np.testing.assert_array_equal(out, invert(o2))

    def test_square_sketch_strokes_lie_near_boundary(self):
        # render-convention square: dark object on the white background
        img = np.full((256, 256), 255, np.uint8)
        img[78:178, 78:178] = 30
        out = generate_sketch(img, SketchParams())
        # strokes are the sketch's dark lines; the dodge branch only dims
        # its shading band to ~217 under the default blend weight
        stroke_ys, stroke_xs = np.nonzero(out < 128)
        assert len(stroke_ys) > 0
        top, bottom, left, right = 78, 177, 78, 177
        dy = np.maximum.reduce([top - stroke_ys, stroke_ys - bottom,
                                np.zeros_like(stroke_ys)])
        dx = np.maximum.reduce([left - stroke_xs, stroke_xs - right,
                                np.zeros_like(stroke_xs)])
        outside = np.sqrt(dy ** 2 + dx ** 2)
        inside = np.minimum.reduce([stroke_ys - top, bottom - stroke_ys,
                                    stroke_xs - left, right - stroke_xs])
        dist = np.where(outside > 0, outside, np.maximum(inside, 0))
        assert dist.max() <= 2.0

    def test_blend_affine_within_rounding(self, rendered_view):
        p1 = SketchParams(blend_weight_o1=1.0)
        p0 = SketchParams(blend_weight_o1=0.0)
        o1 = generate_sketch(rendered_view, p1).astype(np.float64)
        o2d = generate_sketch(rendered_view, p0).astype(np.float64)
        for w in (0.15, 0.4, 0.85):
            out = generate_sketch(rendered_view, SketchParams(blend_weight_o1=w))
            expected = w * o1 + (1 - w) * o2d
            assert np.abs(out.astype(np.float64) - expected).max() <= 1.0

    def test_weighted_output_close_to_edge_branch(self, rendered_view):
        params = SketchParams()  # w = 0.15
        out = generate_sketch(rendered_view, params).astype(np.float64)
        o2d = generate_sketch(
            rendered_view, SketchParams(blend_weight_o1=0.0)).astype(np.float64)
        assert np.abs(out - o2d).max() <= params.blend_weight_o1 * 255 + 1

    @pytest.mark.parametrize("op", [OP_SCHARR, OP_PREWITT, OP_SOBEL, OP_ROBERTS])
    def test_operator_variants_run(self, rendered_view, op):
        params = SketchParams(operator=op, canny_high=200.0)
        out = generate_sketch(rendered_view, params)
        assert out.shape == rendered_view.shape
        assert out.min() < out.max()  # strokes present

    def test_deterministic(self, rendered_view):
        a = generate_sketch(rendered_view, SketchParams())
        b = generate_sketch(rendered_view, SketchParams())
        np.testing.assert_array_equal(a, b)

    def test_rgb_input_accepted(self):
        rgb = np.zeros((64, 64, 3), np.uint8)
        rgb[20:40, 20:40] = (200, 180, 160)
        out = generate_sketch(rgb, SketchParams())
        assert out.shape == (64, 64)


class TestSketchParams:
    def test_even_kernel_rejected(self):
        with pytest.raises(InvalidParams):
            SketchParams(gaussian_kernel=4)

    def test_threshold_order_enforced(self):
        with pytest.raises(InvalidParams):
            SketchParams(canny_low=300, canny_high=100)

    def test_weight_range(self):
        with pytest.raises(InvalidParams):
            SketchParams(blend_weight_o1=1.5)

    def test_operator_checked(self):
        with pytest.raises(InvalidParams):
            SketchParams(operator="laplacian")


@settings(max_examples=25, deadline=None)
@given(w=st.floats(min_value=0.0, max_value=1.0),
       seed=st.integers(min_value=0, max_value=2 ** 16))
def test_blend_bound_property(w, seed):
    rng = np.random.default_rng(seed)
    img = rng.integers(0, 256, (64, 64), dtype=np.uint8)
    params = SketchParams(blend_weight_o1=w, gaussian_kernel=5, gaussian_sigma=1.5)
    out = generate_sketch(img, params).astype(np.float64)
    o2d = generate_sketch(
        img, SketchParams(blend_weight_o1=0.0, gaussian_kernel=5,
                          gaussian_sigma=1.5)).astype(np.float64)
    assert out.shape == img.shape
    assert np.abs(out - o2d).max() <= w * 255 + 1
