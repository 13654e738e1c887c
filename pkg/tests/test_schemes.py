"""Tests for the end-to-end encoders/decoders and chaining."""

import numpy as np
import pytest

from polarwom.models import (
    make_asymmetric,
    make_example2,
    sample_state,
    simulate_channel,
)
from polarwom.profiles import estimate_profile, select_sets
from polarwom.schemes import (
    ChainProfile,
    SideChannelPayload,
    c1_decode,
    c1_encode,
    c2_decode,
    c2_encode,
    c3_decode,
    c3_encode,
    degenerate_state_vector,
    effective_rate,
    simulate_blocks,
)
from polarwom.transform import polar_transform


def noiseless_wom(n=256, samples=20_000, seed=7):
    spec = make_example2(0.0, 0.5, 0.25)
    zp = estimate_profile(spec, n, samples, seed=seed)
    # message bits only where the conditional is uniform for every observed
    # state, so fixing them never contradicts the model
    prof = select_sets(zp, z_high_threshold=1.0 - 1e-12, z_low_threshold=0.5,
                       error_target=1e9, model_id="example2")
    return spec, prof.with_frozen_bits(
        np.random.default_rng(seed).integers(0, 2, prof.frozen.size).astype(np.uint8))


def noisy_profile(n=1024, seed=7):
    spec = make_example2(0.1, 0.5, 0.25)
    zp = estimate_profile(spec, n, 5000, seed=seed)
    prof = select_sets(zp, error_target=0.3, model_id="example2")
    return spec, prof.with_frozen_bits(
        np.random.default_rng(seed).integers(0, 2, prof.frozen.size).astype(np.uint8))


class TestInformedEncoderScheme:
    def test_noiseless_round_trip(self):
        spec, prof = noiseless_wom()
        rng = np.random.default_rng(0)
        n = prof.n
        for _ in range(20):
            msg = rng.integers(0, 2, prof.message.size).astype(np.uint8)
            s = sample_state(spec, (n,), rng)
            x, payload, info = c2_encode(prof, spec, msg, s, rng)
            y = simulate_channel(spec, x[None, :], s[None, :], rng)[0]
            est, dinfo = c2_decode(prof, spec, y, payload)
            np.testing.assert_array_equal(est, msg)
            assert not dinfo["failed"]

    def test_write_respects_stuck_cells(self):
        spec, prof = noisy_profile()
        rng = np.random.default_rng(1)
        msgs = rng.integers(0, 2, (50, prof.message.size)).astype(np.uint8)
        s = sample_state(spec, (50, prof.n), rng)
        x, _, _ = c2_encode(prof, spec, msgs, s, rng)
        assert not np.any((s == 1) & (x == 1))

    def test_cost_tracks_written_fraction(self):
        spec, prof = noisy_profile()
        rng = np.random.default_rng(2)
        msgs = rng.integers(0, 2, (50, prof.message.size)).astype(np.uint8)
        s = sample_state(spec, (50, prof.n), rng)
        x, _, info = c2_encode(prof, spec, msgs, s, rng)
        np.testing.assert_allclose(info["cost"], x.sum(axis=1))

    def test_encode_internal_consistency(self):
        spec, prof = noisy_profile()
        rng = np.random.default_rng(3)
        msg = rng.integers(0, 2, prof.message.size).astype(np.uint8)
        s = sample_state(spec, (prof.n,), rng)
        x, payload, info = c2_encode(prof, spec, msg, s, rng)
        np.testing.assert_array_equal(info["v"], polar_transform(info["u"]))
        np.testing.assert_array_equal(info["u"][prof.message], msg)
        np.testing.assert_array_equal(info["u"][prof.frozen], prof.frozen_bits)
        np.testing.assert_array_equal(payload.bits, info["u"][prof.side])
        np.testing.assert_array_equal(x, spec.x_map[info["v"], s])

    def test_decoder_uses_side_payload(self):
        # demote the first message index to the side set so the payload sits
        # before the remaining message bits in decoding order
        from dataclasses import replace
        spec, prof = noisy_profile()
        moved = prof.message[0]
        prof = replace(
            prof,
            message=prof.message[1:],
            side=np.sort(np.append(prof.side, moved)),
            relay_set=np.array([], np.int64),
        )
        rng = np.random.default_rng(4)
        msgs = rng.integers(0, 2, (50, prof.message.size)).astype(np.uint8)
        s = sample_state(spec, (50, prof.n), rng)
        x, payload, _ = c2_encode(prof, spec, msgs, s, rng)
        y = simulate_channel(spec, x, s, rng)
        good, ginfo = c2_decode(prof, spec, y, payload)
        bad, _ = c2_decode(prof, spec, y, 1 - payload.bits)
        # the decoder fixes the side positions to the supplied payload
        np.testing.assert_array_equal(ginfo["u"][:, prof.side], payload.bits)
        good_err = np.any(good != msgs, axis=1).mean()
        bad_err = np.any(bad != msgs, axis=1).mean()
        assert bad_err > good_err

    def test_shape_validation(self):
        spec, prof = noisy_profile()
        rng = np.random.default_rng(5)
        with pytest.raises(ValueError):
            c2_encode(prof, spec, np.zeros(3, np.uint8),
                      np.zeros(prof.n, np.int64), rng)
        with pytest.raises(ValueError):
            c2_encode(prof, spec, np.zeros(prof.message.size, np.uint8),
                      np.zeros(prof.n - 1, np.int64), rng)

    def test_impossible_observation_flags_failure(self):
        # all-ones output forces v = 1 everywhere under the noiseless model;
        # freezing one of those positions to the opposite bit is impossible
        from dataclasses import replace
        spec, prof = noiseless_wom()
        u_forced = polar_transform(np.ones(prof.n, np.uint8))
        moved = prof.message[0]
        new_frozen = np.sort(np.append(prof.frozen, moved))
        bits = np.zeros(new_frozen.size, np.uint8)
        bits[np.searchsorted(new_frozen, moved)] = 1 - u_forced[moved]
        prof = replace(
            prof,
            message=prof.message[1:],
            frozen=new_frozen,
            frozen_bits=bits,
            relay_set=np.array([], np.int64),
        )
        y = np.ones(prof.n, dtype=np.int64)
        est, dinfo = c2_decode(prof, spec, y, np.zeros(prof.side.size, np.uint8))
        assert dinfo["failed"]


class TestDegenerateStateEquivalence:
    def _profile(self, seed):
        spec = make_asymmetric(0.02, 0.2)
        zp = estimate_profile(spec, 64, 500, seed=seed)
        prof = select_sets(zp, error_target=1.0, model_id="basym")
        return spec, prof.with_frozen_bits(
            np.random.default_rng(seed).integers(0, 2, prof.frozen.size).astype(np.uint8))

    def test_bit_identical_encode_and_decode(self):
        spec, prof = self._profile(0)
        for trial in range(20):
            rng_a = np.random.default_rng(trial)
            rng_b = np.random.default_rng(trial)
            msg = np.random.default_rng(trial + 100).integers(
                0, 2, prof.message.size).astype(np.uint8)
            x1, p1, i1 = c1_encode(prof, spec, msg, rng_a)
            x2, p2, i2 = c2_encode(prof, spec, msg,
                                   degenerate_state_vector(prof.n), rng_b)
            np.testing.assert_array_equal(x1, x2)
            np.testing.assert_array_equal(i1["u"], i2["u"])
            y = simulate_channel(spec, x1[None, :],
                                 degenerate_state_vector(prof.n)[None, :],
                                 np.random.default_rng(trial + 200))[0]
            e1, _ = c1_decode(prof, spec, y, p1)
            e2, _ = c2_decode(prof, spec, y, p2)
            np.testing.assert_array_equal(e1, e2)

    def test_round_trip_over_clean_channel(self):
        spec, prof = self._profile(1)
        clean = make_asymmetric(0.0, 0.0, p_x1=float(spec.p_v_given_s[0]))
        rng = np.random.default_rng(9)
        msg = rng.integers(0, 2, prof.message.size).astype(np.uint8)
        x, payload, _ = c1_encode(prof, clean, msg, rng)
        est, _ = c1_decode(prof, clean, x.astype(np.int64), payload)
        np.testing.assert_array_equal(est, msg)


class TestChaining:
    def test_relay_round_trip_and_rate_identity(self):
        spec, prof = noisy_profile()
        assert prof.chainable() and prof.relay_set.size > 0
        k = 4
        chain = ChainProfile(k=k, profile=prof)
        rng = np.random.default_rng(10)
        stats = simulate_blocks(prof, spec, 60, rng, k=k)
        assert stats.fer <= 0.3
        assert stats.wom_violations == 0
        diff = effective_rate(chain) - effective_rate(ChainProfile(k=1, profile=prof))
        assert diff == pytest.approx((k - 1) / k * prof.side.size / prof.n)

    def test_chain_decode_matches_manual_blocks(self):
        spec, prof = noiseless_wom()
        k = 3
        chain = ChainProfile(k=k, profile=prof)
        rng = np.random.default_rng(11)
        per = chain.message_bits_per_block
        msgs = rng.integers(0, 2, (k, per)).astype(np.uint8)
        states = sample_state(spec, (k, prof.n), rng)
        xs, payload, info = c3_encode(chain, spec, msgs, states, rng)
        ys = np.stack([
            simulate_channel(spec, xs[j][None, :], states[j][None, :], rng)[0]
            for j in range(k)])
        est = c3_decode(chain, spec, ys, payload)
        if isinstance(est, tuple):
            est = est[0]
        np.testing.assert_array_equal(np.asarray(est), msgs)

    def test_chain_profile_validation(self):
        spec, prof = noisy_profile()
        with pytest.raises(ValueError):
            ChainProfile(k=0, profile=prof)
        bad = prof.with_frozen_bits(prof.frozen_bits)
        object.__setattr__(bad, "relay_set", np.array([], np.int64))
        if bad.side.size:
            with pytest.raises(ValueError):
                ChainProfile(k=2, profile=bad)


class TestSimulateBlocks:
    def test_counts_and_bounds(self):
        spec, prof = noisy_profile()
        rng = np.random.default_rng(12)
        stats = simulate_blocks(prof, spec, 40, rng)
        assert stats.blocks == 40
        assert 0.0 <= stats.fer <= 1.0
        assert stats.errors == round(stats.fer * 40)
        assert 0.0 <= stats.mean_cost <= 1.0
        assert stats.wom_violations == 0

    def test_rejects_no_blocks(self):
        spec, prof = noisy_profile()
        with pytest.raises(ValueError):
            simulate_blocks(prof, spec, 0, np.random.default_rng(0))

    def test_noiseless_fer_zero(self):
        spec, prof = noiseless_wom()
        stats = simulate_blocks(prof, spec, 100, np.random.default_rng(13))
        assert stats.fer == 0.0
        assert stats.decode_failures == 0


class TestEffectiveRate:
    def test_single_block_accounting(self):
        spec, prof = noisy_profile()
        expect = (prof.message.size - prof.side.size) / prof.n
        assert effective_rate(prof) == pytest.approx(expect)

    def test_chain_accounting(self):
        spec, prof = noisy_profile()
        k = 5
        chain = ChainProfile(k=k, profile=prof)
        per = prof.message.size - prof.relay_set.size
        expect = (k * per - prof.side.size) / (k * prof.n)
        assert effective_rate(chain) == pytest.approx(expect)
