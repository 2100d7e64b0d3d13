"""Channel layer: uploading draws, polling/ALOHA rounds, closed forms."""

import math

import numpy as np
import pytest

from gdas.access import (
    ChannelConfig,
    aloha_round,
    crossover_check,
    expected_successes,
    mean_rounds_bound,
    optimal_q,
    polling_round,
    sample_upload_success,
    uploading_probability,
)


class TestUploadingProbability:
    def test_threshold_at_average_snr(self):
        assert uploading_probability(2.0, 2.0, 1.0) == pytest.approx(math.exp(-1.0))

    def test_no_measurement_means_no_upload(self):
        assert uploading_probability(1.0, 3.0, 0.0) == 0.0

    def test_zero_threshold_reduces_to_availability(self):
        assert uploading_probability(0.0, 5.0, 0.37) == pytest.approx(0.37)

    def test_parameter_validation(self):
        with pytest.raises(ValueError):
            uploading_probability(-1.0, 1.0, 0.5)
        with pytest.raises(ValueError):
            uploading_probability(1.0, 0.0, 0.5)
        with pytest.raises(ValueError):
            uploading_probability(1.0, 1.0, 1.5)

    def test_physical_sampling_matches_closed_form(self, rng):
        snr_threshold, snr_avg, availability = 1.5, 2.5, 0.8
        hits = sample_upload_success(snr_threshold, snr_avg, availability, rng, size=200_000)
        want = uploading_probability(snr_threshold, snr_avg, availability)
        se = math.sqrt(want * (1 - want) / hits.size)
        assert abs(hits.mean() - want) < 4 * se


class TestChannelConfig:
    def test_direct_probability(self):
        cfg = ChannelConfig(n_channels=4, mode="aloha", p=0.2)
        assert cfg.upload_prob() == 0.2

    def test_physical_triple(self):
        cfg = ChannelConfig(
            n_channels=2, mode="polling", snr_threshold=1.0, snr_avg=1.0, availability=0.5
        )
        assert cfg.upload_prob() == pytest.approx(0.5 * math.exp(-1.0))

    def test_rejects_mixed_or_missing_parameterization(self):
        with pytest.raises(ValueError):
            ChannelConfig(n_channels=2, mode="aloha", p=0.2, snr_threshold=1.0,
                          snr_avg=1.0, availability=1.0)
        with pytest.raises(ValueError):
            ChannelConfig(n_channels=2, mode="aloha")
        with pytest.raises(ValueError):
            ChannelConfig(n_channels=0, mode="aloha", p=0.2)
        with pytest.raises(ValueError):
            ChannelConfig(n_channels=2, mode="csma", p=0.2)


class TestPollingRound:
    def test_certain_upload_delivers_everything(self, rng):
        out = polling_round([3, 1, 7], 4, 1.0, rng)
        assert out.delivered == out.responders == (3, 1, 7)
        assert out.collided_channels == ()

    def test_impossible_upload_delivers_nothing(self, rng):
        out = polling_round([3, 1, 7], 4, 0.0, rng)
        assert out.delivered == ()
        assert out.requested == (3, 1, 7)

    def test_too_many_requests_rejected(self, rng):
        with pytest.raises(ValueError, match="at most 2"):
            polling_round([1, 2, 3], 2, 0.5, rng)

    def test_duplicate_requests_rejected(self, rng):
        with pytest.raises(ValueError, match="duplicate"):
            polling_round([1, 1], 4, 0.5, rng)

    def test_mean_deliveries_match_formula(self, rng):
        total = sum(len(polling_round([1, 2, 3, 4], 4, 0.2, rng).delivered) for _ in range(100_000))
        mean = total / 100_000
        assert mean == pytest.approx(0.8, rel=0.02)


class TestAlohaRound:
    def test_two_responders_one_channel_always_collide(self, rng):
        out = aloha_round([5, 9], 1, 1.0, rng)
        assert out.delivered == ()
        assert out.collided_channels == (1,)
        assert set(out.responders) == {5, 9}

    def test_single_responder_always_delivers(self, rng):
        for _ in range(50):
            out = aloha_round([4], 3, 1.0, rng)
            assert out.delivered == (4,)

    def test_outcome_containments(self, rng):
        for _ in range(200):
            out = aloha_round(list(range(1, 13)), 3, 0.4, rng)
            assert set(out.delivered) <= set(out.responders) <= set(out.requested)
            assert len(set(out.delivered)) == len(out.delivered)
            for node in out.delivered:
                ch = out.channel_choice[node]
                sharers = [r for r, c in out.channel_choice.items() if c == ch]
                assert sharers == [node]

    def test_mean_deliveries_match_formula(self, rng):
        requested = list(range(1, 21))
        total = sum(len(aloha_round(requested, 4, 0.2, rng).delivered) for _ in range(100_000))
        mean = total / 100_000
        assert mean == pytest.approx(20 * 0.2 * (1 - 0.05) ** 19, rel=0.02)

    @pytest.mark.parametrize("q", [1, 5, 20])
    @pytest.mark.parametrize("n", [1, 4, 16])
    @pytest.mark.parametrize("p", [0.1, 0.2, 0.5])
    def test_formula_within_three_standard_errors(self, q, n, p, rng):
        rounds = 30_000
        requested = list(range(1, q + 1))
        counts = np.array(
            [len(aloha_round(requested, n, p, rng).delivered) for _ in range(rounds)],
            dtype=float,
        )
        want = expected_successes("aloha", n, p, q)
        # Poisson floor keeps the band meaningful when successes are rare.
        se = max(counts.std(ddof=1), math.sqrt(want)) / math.sqrt(rounds)
        assert abs(counts.mean() - want) <= 3 * max(se, 1e-12)


class TestExpectedSuccesses:
    def test_polling_formula(self):
        assert expected_successes("polling", 4, 0.2, 4) == pytest.approx(0.8)
        # Requests beyond the channel count cannot add deliveries.
        assert expected_successes("polling", 4, 0.2, 10) == pytest.approx(0.8)
        assert expected_successes("polling", 4, 0.2, 2) == pytest.approx(0.4)

    def test_aloha_single_request(self):
        assert expected_successes("aloha", 7, 0.31, 1) == pytest.approx(0.31)

    def test_aloha_optimal_load_approaches_n_over_e(self):
        exact = expected_successes("aloha", 4, 0.2, 20)
        assert exact == pytest.approx(1.5094, abs=1e-4)
        assert abs(exact - 4 * math.exp(-1.0)) / exact < 0.03

    def test_maximum_attained_at_n_over_p(self):
        # When N/p is an integer the ratio test gives an exact tie with the
        # neighbor below, so assert on the attained value, not the argmax.
        for n in (2, 4, 8):
            for p in (0.1, 0.2, 0.4):
                qs = range(1, int(3 * n / p) + 1)
                best = max(expected_successes("aloha", n, p, q) for q in qs)
                at_rounding = max(
                    expected_successes("aloha", n, p, math.floor(n / p)),
                    expected_successes("aloha", n, p, math.ceil(n / p)),
                )
                assert at_rounding == pytest.approx(best, rel=1e-12)


class TestOptimalQ:
    def test_paper_operating_point(self):
        assert optimal_q(4, 0.2, 100) == 20

    def test_capped_by_remaining(self):
        assert optimal_q(4, 0.2, 3) == 3

    def test_certain_upload(self):
        assert optimal_q(4, 1.0, 100) == 4

    def test_requires_positive_p(self):
        with pytest.raises(ValueError):
            optimal_q(4, 0.0, 10)


class TestMeanRoundsBound:
    def test_reference_values(self):
        assert mean_rounds_bound("polling", 75, 4, 0.2) == pytest.approx(93.75)
        assert mean_rounds_bound("aloha-approx", 75, 4, 0.2) == pytest.approx(50.968, abs=1e-3)
        assert mean_rounds_bound("aloha", 75, 4, 0.2, q=20) == pytest.approx(49.68, abs=0.02)

    def test_zero_target_needs_zero_rounds(self):
        assert mean_rounds_bound("polling", 0, 4, 0.2) == 0.0
        assert mean_rounds_bound("aloha", 0, 4, 0.2, q=20) == 0.0

    def test_aloha_needs_q(self):
        with pytest.raises(ValueError, match="needs q"):
            mean_rounds_bound("aloha", 10, 4, 0.2)


class TestCrossover:
    def test_below_threshold_favors_aloha(self):
        assert crossover_check(0.2) is True

    def test_above_threshold_favors_polling(self):
        assert crossover_check(0.5) is False

    def test_boundary_resolves_to_polling(self):
        assert crossover_check(math.exp(-1.0)) is False
