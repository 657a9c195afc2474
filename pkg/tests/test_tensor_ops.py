"""Tests for tensor operations and the autodiff tape."""

import numpy as np
import pytest

from src.tt_contrastive.errors import (
    DomainError,
    EmptyTensorError,
    NotScalarError,
    NumericError,
    RankOverflowError,
    ShapeMismatchError,
)
from src.tt_contrastive.tensor import (
    FlopCounter,
    Graph,
    Tensor,
    add,
    backward,
    concat,
    contract,
    exp,
    expand,
    extract_patches,
    get_accumulate_dtype,
    log,
    max_,
    mean,
    mul,
    no_grad,
    precision,
    relu,
    reshape,
    set_accumulate_dtype,
    set_num_threads,
    sum_,
    transpose,
)


class TestTensor:
    """Tensor construction and storage."""

    def test_default_dtype_is_float32(self):
        assert Tensor([1, 2, 3]).data.dtype == np.float32

    def test_precision_context_restores_dtype(self):
        with precision(np.float64):
            assert Tensor([1.0]).data.dtype == np.float64
        assert Tensor([1.0]).data.dtype == np.float32

    def test_constructor_copies_data(self):
        source = np.array([1.0, 2.0], dtype=np.float32)
        t = Tensor(source)
        source[0] = 99.0
        assert t.data[0] == 1.0

    def test_zero_extent_rejected(self):
        with pytest.raises(EmptyTensorError):
            Tensor(np.zeros((0, 3)))

    def test_flat_buffer_is_row_major(self):
        t = Tensor(np.arange(6).reshape(2, 3))
        assert t.data.ravel().tolist() == [0, 1, 2, 3, 4, 5]
        assert t.data.flags["C_CONTIGUOUS"]


class TestContract:
    """Contraction over paired axes."""

    def test_dot_product(self):
        out = contract(Tensor([1, 2, 3]), Tensor([4, 5, 6]), [(0, 0)])
        assert out.shape == ()
        assert out.item() == 32.0

    def test_matrix_product_matches_numpy(self):
        rng = np.random.default_rng(0)
        x = rng.normal(size=(3, 4))
        y = rng.normal(size=(4, 5))
        out = contract(Tensor(x), Tensor(y), [(1, 0)])
        np.testing.assert_allclose(out.data, (x @ y).astype(np.float32), rtol=1e-5, atol=1e-6)

    def test_output_is_free_x_axes_then_free_y_axes(self):
        x = Tensor(np.ones((2, 3, 4)))
        y = Tensor(np.ones((5, 3)))
        assert contract(x, y, [(1, 1)]).shape == (2, 4, 5)

    def test_empty_axes_is_outer_product(self):
        out = contract(Tensor([1, 2]), Tensor([3, 4, 5]), [])
        np.testing.assert_array_equal(out.data, np.outer([1, 2], [3, 4, 5]))

    def test_extent_mismatch_names_axis_pair(self):
        with pytest.raises(ShapeMismatchError) as exc_info:
            contract(Tensor(np.ones((2, 3))), Tensor(np.ones((4, 2))), [(1, 0)])
        assert exc_info.value.axis_pair == (1, 0)
        assert exc_info.value.exit_code == 4

    def test_axis_out_of_range(self):
        with pytest.raises(ShapeMismatchError):
            contract(Tensor(np.ones(3)), Tensor(np.ones(3)), [(1, 0)])

    def test_rank_overflow(self):
        x = Tensor(np.ones((1,) * 5))
        y = Tensor(np.ones((1,) * 4))
        with pytest.raises(RankOverflowError) as exc_info:
            contract(x, y, [])
        assert exc_info.value.rank == 9

    def test_threaded_contraction_is_deterministic(self):
        rng = np.random.default_rng(1)
        x = Tensor(rng.normal(size=(12, 7)))
        y = Tensor(rng.normal(size=(7, 5)))
        reference = contract(x, y, [(1, 0)]).data
        set_num_threads(3)
        first = contract(x, y, [(1, 0)]).data
        second = contract(x, y, [(1, 0)]).data
        np.testing.assert_array_equal(first, second)
        np.testing.assert_allclose(first, reference, rtol=1e-5, atol=1e-6)

    def test_float32_accumulator(self):
        set_accumulate_dtype("float32")
        assert get_accumulate_dtype() == np.float32
        out = contract(Tensor([1, 2, 3]), Tensor([4, 5, 6]), [(0, 0)])
        assert out.item() == 32.0

    def test_rejects_unknown_accumulator(self):
        with pytest.raises(ValueError):
            set_accumulate_dtype("float16")

    def test_rejects_zero_threads(self):
        with pytest.raises(ValueError):
            set_num_threads(0)


class TestFlopCounter:
    """Multiply-add accounting of contractions."""

    def test_counts_output_size_times_contracted_extent(self):
        with FlopCounter() as counter:
            contract(Tensor(np.ones((2, 3))), Tensor(np.ones((3, 4))), [(1, 0)])
        assert counter.multiply_adds == 2 * 4 * 3
        assert counter.flops == 48
        assert counter.calls == 1

    def test_outer_products_are_not_counted(self):
        with FlopCounter() as counter:
            expand(Tensor([1.0, 2.0]), (5,))
        assert counter.multiply_adds == 0

    def test_nested_counters_both_count(self):
        with FlopCounter() as outer:
            with FlopCounter() as inner:
                contract(Tensor([1, 2]), Tensor([3, 4]), [(0, 0)])
            contract(Tensor([1, 2]), Tensor([3, 4]), [(0, 0)])
        assert inner.multiply_adds == 2
        assert outer.multiply_adds == 4


class TestElementwiseAndReductions:
    """Forward values and simple gradients."""

    def test_relu_forward_and_gradient(self):
        x = Tensor([-1.0, 0.0, 2.0], requires_grad=True)
        with Graph():
            y = relu(x)
            backward(sum_(y))
        assert y.data.tolist() == [0.0, 0.0, 2.0]
        assert x.grad.tolist() == [0.0, 0.0, 1.0]

    def test_max_routes_gradient_to_first_maximum(self):
        x = Tensor([3.0, 1.0, 3.0], requires_grad=True)
        with Graph():
            backward(max_(x))
        assert x.grad.tolist() == [1.0, 0.0, 0.0]

    def test_fan_out_accumulates(self):
        x = Tensor(5.0, requires_grad=True)
        with Graph():
            backward(add(x, x))
        assert float(x.grad) == 2.0

    def test_repeated_backward_accumulates(self):
        x = Tensor([1.0, 2.0], requires_grad=True)
        for _ in range(2):
            with Graph():
                backward(sum_(mul(x, x)))
        np.testing.assert_allclose(x.grad, [4.0, 8.0])

    def test_scalar_operand(self):
        x = Tensor([1.0, 2.0], requires_grad=True)
        s = Tensor(3.0, requires_grad=True)
        with Graph():
            backward(sum_(mul(x, s)))
        np.testing.assert_allclose(x.grad, [3.0, 3.0])
        assert float(s.grad) == pytest.approx(3.0)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeMismatchError):
            add(Tensor([1.0, 2.0]), Tensor([1.0, 2.0, 3.0]))

    def test_log_domain(self):
        with pytest.raises(DomainError):
            log(Tensor([0.0, 1.0]))

    def test_mean_over_axis(self):
        out = mean(Tensor([[1.0, 2.0], [3.0, 5.0]]), axis=1)
        assert out.data.tolist() == [1.5, 4.0]

    def test_reduce_axis_out_of_range(self):
        with pytest.raises(ShapeMismatchError):
            sum_(Tensor([1.0, 2.0]), axis=1)

    def test_backward_needs_scalar(self):
        x = Tensor([1.0, 2.0], requires_grad=True)
        with Graph():
            y = mul(x, x)
            with pytest.raises(NotScalarError):
                backward(y)

    def test_intermediate_outputs_receive_gradients(self):
        x = Tensor([1.0, 2.0], requires_grad=True)
        with Graph():
            y = mul(x, 3.0)
            backward(sum_(y))
        np.testing.assert_allclose(y.grad, [1.0, 1.0])

    def test_no_grad_records_nothing(self):
        x = Tensor([1.0, 2.0], requires_grad=True)
        with Graph() as graph, no_grad():
            y = mul(x, x)
        assert y.node is None
        assert not y.requires_grad
        assert len(graph) == 0

    def test_operands_from_different_graphs(self):
        x = Tensor([1.0], requires_grad=True)
        with Graph():
            a = mul(x, 2.0)
        with Graph():
            b = mul(x, 3.0)
        with pytest.raises(NumericError):
            add(a, b)

    def test_fan_out_without_explicit_graph(self):
        x = Tensor([1.7], requires_grad=True)
        backward(sum_(add(exp(x), log(x))))
        assert float(x.grad[0]) == pytest.approx(np.exp(1.7) + 1 / 1.7, rel=1e-5)

    def test_implicit_tapes_merge_in_order(self):
        x = Tensor([2.0], requires_grad=True)
        a = mul(x, x)
        b = mul(x, 3.0)
        out = add(a, b)
        graph = out.node.graph
        assert graph.implicit
        assert a.node.graph is graph and b.node.graph is graph
        assert [node.index for node in graph.nodes] == [0, 1, 2]
        backward(sum_(out))
        np.testing.assert_allclose(x.grad, [7.0])

    def test_explicit_graph_adopts_implicit_tape(self):
        x = Tensor([2.0], requires_grad=True)
        a = exp(x)
        with Graph() as graph:
            b = mul(x, 2.0)
            out = add(a, b)
        assert out.node.graph is graph
        assert a.node.graph is graph
        assert len(graph) == 3
        backward(sum_(out))
        np.testing.assert_allclose(x.grad, [np.exp(2.0) + 2.0], rtol=1e-6)

    def test_release_detaches_outputs(self):
        x = Tensor([1.0], requires_grad=True)
        with Graph() as graph:
            y = mul(x, 2.0)
        graph.release()
        assert y.node is None
        assert len(graph) == 0


class TestMovement:
    """reshape, transpose, concat, expand and extract_patches."""

    def test_reshape_keeps_order(self):
        out = reshape(Tensor(np.arange(6)), (2, 3))
        np.testing.assert_array_equal(out.data, np.arange(6).reshape(2, 3))

    def test_reshape_size_mismatch(self):
        with pytest.raises(ShapeMismatchError):
            reshape(Tensor(np.arange(6)), (4, 2))

    def test_transpose_gradient_is_inverse_permutation(self):
        x = Tensor(np.arange(6).reshape(1, 2, 3), requires_grad=True)
        weights = np.arange(6).reshape(3, 1, 2).astype(np.float32)
        with Graph():
            y = transpose(x, (2, 0, 1))
            backward(sum_(mul(y, Tensor(weights))))
        np.testing.assert_array_equal(x.grad, np.transpose(weights, (1, 2, 0)))

    def test_invalid_permutation(self):
        with pytest.raises(ShapeMismatchError):
            transpose(Tensor(np.ones((2, 3))), (0, 0))

    def test_concat_splits_gradient(self):
        a = Tensor(np.ones((2, 1)), requires_grad=True)
        b = Tensor(np.ones((2, 2)), requires_grad=True)
        weights = Tensor(np.arange(6).reshape(2, 3))
        with Graph():
            backward(sum_(mul(concat([a, b], axis=1), weights)))
        np.testing.assert_array_equal(a.grad, [[0.0], [3.0]])
        np.testing.assert_array_equal(b.grad, [[1.0, 2.0], [4.0, 5.0]])

    def test_concat_shape_mismatch(self):
        with pytest.raises(ShapeMismatchError):
            concat([Tensor(np.ones((2, 1))), Tensor(np.ones((3, 1)))], axis=1)

    def test_expand_repeats_rows(self):
        out = expand(Tensor([1.0, 2.0]), (3,))
        np.testing.assert_array_equal(out.data, [[1.0, 2.0]] * 3)

    def test_extract_patches_zero_pads(self):
        image = np.arange(1, 10, dtype=np.float32).reshape(1, 3, 3, 1)
        patches = extract_patches(Tensor(image), 3)
        assert patches.shape == (1, 3, 3, 3, 3, 1)
        np.testing.assert_array_equal(patches.data[0, 1, 1, :, :, 0], image[0, :, :, 0])
        np.testing.assert_array_equal(patches.data[0, 0, 0, :, :, 0],
                                      [[0, 0, 0], [0, 1, 2], [0, 4, 5]])

    def test_extract_patches_rejects_even_kernel(self):
        with pytest.raises(ShapeMismatchError):
            extract_patches(Tensor(np.ones((1, 3, 3, 1))), 2)
