import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tensorlab import core
from tensorlab.core import (DenseTensor, Decomposition, F2Code, GroupElement,
                            SimpleTerm, act, decode, encode, evaluate,
                            outer_product, permute_directions, tensors_close)
from tensorlab.f2 import random_invertible_f2

from conftest import random_invertible_complex


def f2_tensor(data):
    return DenseTensor(np.asarray(data, np.uint8), f2=True)


class TestOuterProduct:
    def test_basis_case(self):
        t = outer_product([1, 0, 0], [1, 0, 0], [1, 0, 0])
        expected = np.zeros((3, 3, 3))
        expected[0, 0, 0] = 1
        assert np.array_equal(t.data, expected)

    def test_last_basis_vector_encodes_to_one(self):
        t = outer_product([0, 0, 1], [0, 0, 1], [0, 0, 1], f2=True)
        assert encode(t).bits == 1

    def test_expansion_against_definition(self):
        a, b, c = [1, 1], [1, 0], [1, 0]
        t = outer_product(a, b, c)
        for i in range(2):
            for j in range(2):
                for k in range(2):
                    assert t.data[i, j, k] == a[i] * b[j] * c[k]
        expected = np.zeros((2, 2, 2))
        expected[0, 0, 0] = 1
        expected[1, 0, 0] = 1
        assert np.array_equal(t.data, expected)

    def test_zero_vector_rejected_for_simple_term(self):
        with pytest.raises(ValueError):
            SimpleTerm([0, 0], [1, 0], [1, 0])


class TestSlices:
    def test_frontal_slice_of_expanded_product(self):
        t = outer_product([1, 1], [1, 0], [1, 0])
        assert np.array_equal(t.slice(3, 1), np.array([[1, 0], [1, 0]]))

    def test_zero_tensor_slices(self):
        z = DenseTensor(np.zeros((3, 2, 3)))
        for direction, dim in ((1, 3), (2, 2), (3, 3)):
            for idx in range(1, dim + 1):
                assert not z.slice(direction, idx).any()

    def test_matrix_form_concatenates_frontal_slices(self):
        rng = np.random.default_rng(0)
        t = DenseTensor(rng.normal(size=(3, 3, 3)))
        m = t.matrix_form()
        assert m.shape == (3, 9)
        for k in range(3):
            assert np.array_equal(m[:, 3 * k:3 * (k + 1)], t.slice(3, k + 1))

    def test_out_of_range_rejected(self):
        t = DenseTensor(np.zeros((2, 2, 2)))
        with pytest.raises(IndexError):
            t.slice(3, 3)
        with pytest.raises(ValueError):
            t.slice(4, 1)


class TestAct:
    def test_identity(self):
        rng = np.random.default_rng(1)
        t = DenseTensor(rng.normal(size=(3, 3, 3)))
        g = GroupElement((np.eye(3),) * 3)
        assert tensors_close(act(t, g), t, 1e-15)

    def test_frontal_swap_matches_index_permutation(self):
        rng = np.random.default_rng(2)
        t = DenseTensor(rng.normal(size=(2, 2, 2)))
        g = GroupElement((np.eye(2), np.eye(2), np.array([[0, 1], [1, 0]])))
        swapped = act(t, g)
        assert np.allclose(swapped.data, t.data[:, :, ::-1])

    def test_act_on_outer_product_maps_the_factors(self):
        rng = np.random.default_rng(3)
        for _ in range(25):
            dims = tuple(rng.integers(1, 4, size=3))
            vecs = [rng.normal(size=d) + 1j * rng.normal(size=d) for d in dims]
            mats = tuple(random_invertible_complex(rng, d) for d in dims)
            lhs = act(outer_product(*vecs), GroupElement(mats))
            rhs = outer_product(*(M @ v for M, v in zip(mats, vecs)))
            assert tensors_close(lhs, rhs, 1e-10)

    def test_inverse_roundtrip(self):
        rng = np.random.default_rng(4)
        for _ in range(50):
            dims = tuple(rng.integers(1, 4, size=3))
            t = DenseTensor(rng.normal(size=dims) + 1j * rng.normal(size=dims))
            mats = tuple(random_invertible_complex(rng, d) for d in dims)
            perm = tuple(rng.permutation(3)) if rng.random() < 0.6 else None
            g = GroupElement(mats, perm)
            assert tensors_close(act(act(t, g), g.inverse()), t, 1e-8)

    def test_inverse_roundtrip_f2(self):
        rng = np.random.default_rng(5)
        for _ in range(50):
            t = decode(F2Code(int(rng.integers(0, 2 ** 27)), (3, 3, 3)))
            mats = tuple(random_invertible_f2(rng, 3) for _ in range(3))
            perm = tuple(rng.permutation(3)) if rng.random() < 0.5 else None
            g = GroupElement(mats, perm, f2=True)
            back = act(act(t, g), g.inverse())
            assert np.array_equal(back.data, t.data)

    def test_singular_matrix_rejected(self):
        with pytest.raises(ValueError):
            GroupElement((np.zeros((3, 3)), np.eye(3), np.eye(3)))
        with pytest.raises(ValueError):
            GroupElement((np.ones((2, 2), np.uint8), np.eye(2, dtype=np.uint8),
                          np.eye(2, dtype=np.uint8)), f2=True)


class TestEncodeDecode:
    def test_zero(self):
        assert encode(f2_tensor(np.zeros((3, 3, 3)))).bits == 0

    def test_last_entry_is_low_bit(self):
        d = np.zeros((3, 3, 3), np.uint8)
        d[2, 2, 2] = 1
        assert encode(f2_tensor(d)).bits == 1

    def test_first_entry_is_high_bit(self):
        d = np.zeros((3, 3, 3), np.uint8)
        d[0, 0, 0] = 1
        assert encode(f2_tensor(d)).bits == 2 ** 26

    @given(st.integers(0, 2 ** 8 - 1))
    def test_roundtrip_exhaustive_222(self, code):
        assert encode(decode(F2Code(code, (2, 2, 2)))).bits == code

    def test_roundtrip_sample_333(self):
        rng = np.random.default_rng(6)
        for code in rng.integers(0, 2 ** 27, size=200):
            c = F2Code(int(code), (3, 3, 3))
            assert encode(decode(c)).bits == c.bits
            assert decode(c).f2

    def test_lex_order_matches_integer_order(self):
        flats = {}
        for code in range(2 ** 8):
            flats[code] = tuple(decode(F2Code(code, (2, 2, 2))).data.ravel())
        ordered = sorted(flats, key=flats.get)
        assert ordered == sorted(flats)

    def test_out_of_range_code(self):
        with pytest.raises(core.TensorFormatError):
            F2Code(2 ** 8, (2, 2, 2))


class TestEvaluate:
    def test_empty_decomposition_is_zero(self):
        d = Decomposition((), (3, 3, 3))
        assert not evaluate(d).data.any()

    def test_single_term_matches_outer_product(self):
        rng = np.random.default_rng(7)
        a, b, c = rng.normal(size=3), rng.normal(size=3), rng.normal(size=2)
        d = Decomposition((SimpleTerm(a, b, c),), (3, 3, 2))
        assert tensors_close(evaluate(d), outer_product(a, b, c), 1e-15)

    def test_two_term_antidiagonal_pair(self):
        alpha, beta = 2.0, -3.0
        d = Decomposition((
            SimpleTerm([alpha, 0], [1, 0], [1, 0]),
            SimpleTerm([0, beta], [0, 1], [0, 1])), (2, 2, 2))
        expected = np.zeros((2, 2, 2), complex)
        expected[0, 0, 0] = alpha
        expected[1, 1, 1] = beta
        assert np.allclose(evaluate(d).data, expected)

    def test_four_term_identity_shift_pair(self):
        # the explicit four-term sum for slices (identity, shift)
        terms = (
            SimpleTerm([1, 0.5, 0], [0, 1, 0], [1, 1]),
            SimpleTerm([0, 1, 0], [0, -0.5, 1], [-1, 1]),
            SimpleTerm([1, 0, 0], [1, -1, 0], [1, 0]),
            SimpleTerm([0, 1, 1], [0, 0, 1], [1, 0]),
        )
        d = Decomposition(terms, (3, 3, 2))
        expected = np.zeros((3, 3, 2), complex)
        expected[:, :, 0] = np.eye(3)
        expected[0, 1, 1] = 1
        expected[1, 2, 1] = 1
        assert np.allclose(evaluate(d).data, expected)

    def test_f2_sum_is_xor(self):
        t1 = SimpleTerm([1, 0, 0], [1, 0, 0], [1, 0, 0], f2=True)
        t2 = SimpleTerm([1, 1, 0], [1, 0, 0], [1, 0, 0], f2=True)
        d = Decomposition((t1, t2), (3, 3, 3), f2=True)
        out = evaluate(d)
        assert out.data[0, 0, 0] == 0 and out.data[1, 0, 0] == 1


class TestPermuteDirections:
    def test_dims_follow_permutation(self):
        t = DenseTensor(np.zeros((3, 2, 1)))
        assert permute_directions(t, (2, 0, 1)).dims == (1, 3, 2)

    @given(st.integers(0, 2 ** 8 - 1))
    @settings(max_examples=30)
    def test_roundtrip(self, code):
        t = decode(F2Code(code, (2, 2, 2)))
        perm = (1, 2, 0)
        inv = tuple(np.argsort(perm))
        back = permute_directions(permute_directions(t, perm), inv)
        assert np.array_equal(back.data, t.data)


class TestTextFormats:
    def test_tensor_roundtrip(self):
        rng = np.random.default_rng(8)
        t = DenseTensor(rng.normal(size=(3, 3, 2)) + 1j * rng.normal(size=(3, 3, 2)))
        again = core.read_tensor_text(core.write_tensor_text(t))
        assert tensors_close(t, again, 1e-15)

    def test_f2_code_forms(self):
        assert encode(core.read_tensor_text("3 3 3\n7")).bits == 7
        assert encode(core.read_tensor_text("3 3 3\n0x1F")).bits == 31
        assert encode(core.read_tensor_text("2 2 2\n146")).bits == 146

    def test_scalar_forms(self):
        assert core.parse_scalar("1.5") == 1.5
        assert core.parse_scalar("1+2i") == 1 + 2j
        assert core.parse_scalar("-0.5-0.25i") == -0.5 - 0.25j
        assert core.parse_scalar("2i") == 2j
        with pytest.raises(core.TensorFormatError):
            core.parse_scalar("nan")
        with pytest.raises(core.TensorFormatError):
            core.parse_scalar("spam")

    def test_wrong_entry_count(self):
        with pytest.raises(core.TensorFormatError):
            core.read_tensor_text("2 2 2\n1 2 3")

    def test_decomposition_roundtrip(self):
        terms = (SimpleTerm([1, 2, 3], [0, 1j, 0], [1, 1]),
                 SimpleTerm([1, 0, 0], [1, 1, 0], [0, 2]))
        d = Decomposition(terms, (3, 3, 2), residual=2.5e-9)
        again = core.read_decomposition_text(core.write_decomposition_text(d))
        assert len(again) == 2
        assert again.residual == pytest.approx(2.5e-9)
        assert tensors_close(evaluate(d), evaluate(again), 1e-15)


class TestValidation:
    def test_dims_bounds(self):
        with pytest.raises(ValueError):
            DenseTensor(np.zeros((4, 3, 3)))

    def test_non_finite_rejected(self):
        bad = np.zeros((2, 2, 2))
        bad[0, 0, 0] = np.inf
        with pytest.raises(ValueError):
            DenseTensor(bad)

    def test_f2_entries_validated(self):
        with pytest.raises(ValueError):
            DenseTensor(np.full((2, 2, 2), 2, np.uint8), f2=True)

    def test_term_dims_checked_in_decomposition(self):
        with pytest.raises(ValueError):
            Decomposition((SimpleTerm([1, 0], [1, 0], [1, 0]),), (3, 3, 3))
