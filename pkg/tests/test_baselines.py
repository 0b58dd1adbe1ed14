import numpy as np
import pytest

from stbon.baselines import ablation_distance, coe_full_select, full_bon_generate, majority_vote
from stbon.coe import CoEChain, argmin_select, consistency_scores
from stbon.controller import StBoNConfig, run_stbon
from stbon.errors import InsufficientSamplesError
from stbon.replay import RecordingModel
from stbon.sampling import SamplingParams, derive_rng
from stbon.scorers import STRING_DISTANCE_SENTINEL, rouge_l_f
from stbon.toy import ToyTransformerConfig, build_toy_transformer


def small_toy(seed=0):
    return build_toy_transformer(
        ToyTransformerConfig(num_layers=2, hidden_dim=8, vocab_size=24, max_context=128, weight_seed=seed)
    )


def test_full_bon_basic():
    model = small_toy()
    params = SamplingParams(seed=5)
    single = full_bon_generate(model, params, 1, 40, (1,))
    assert len(single.sequences) == 1
    again = full_bon_generate(model, params, 1, 40, (1,))
    assert single.sequences == again.sequences

    batch = full_bon_generate(model, params, 3, 40, (1,), want_chains=True)
    assert len(batch.sequences) == 3 and len(batch.chains) == 3
    # sample 0's stream is untouched by how many samples run alongside it
    assert batch.sequences[0] == single.sequences[0]


def test_full_bon_prefixes_match_early_truncation_run():
    """Both decoders must step the exact same prefixes up to the window end."""
    model = small_toy(3)
    params = SamplingParams(seed=8)
    prompt = (2, 1)

    rec_full = RecordingModel(model)
    full = full_bon_generate(rec_full, params, 3, 48, prompt)
    rec_st = RecordingModel(model)
    st = run_stbon(rec_st, StBoNConfig(n=3, max_len=48, sampling=params), prompt)

    c, tau = st.telemetry.c, st.telemetry.tau
    horizon = c + tau
    full_prefixes = {p for p in rec_full._steps if len(p) <= len(prompt) + horizon}
    st_prefixes = {p for p in rec_st._steps if len(p) <= len(prompt) + horizon}
    assert st_prefixes == full_prefixes
    # and the winner, completed solo, equals its full-generation twin
    assert st.generated == full.sequences[st.record.final]


def brute_force_majority(answers):
    best_count, best_index = -1, 0
    for i, label in enumerate(answers):
        if label is None:
            continue
        count = sum(1 for other in answers if other == label)
        if count > best_count:
            best_count, best_index = count, i
    return best_index if best_count > 0 else 0


def test_majority_vote_matches_brute_force():
    rng = derive_rng(0, 8)
    labels = ["A", "B", "C", "D", None]
    for _ in range(1000):
        n = int(rng.integers(1, 9))
        answers = [labels[int(rng.integers(len(labels)))] for _ in range(n)]
        winner, tally = majority_vote(answers)
        assert winner == brute_force_majority(answers)
        if any(a is not None for a in answers):
            assert answers[winner] is not None


def test_majority_vote_recorded_tally():
    # answers [C, C, B, C, B]: C wins 3 to 2; winner is the first C sample
    winner, tally = majority_vote(["C", "C", "B", "C", "B"])
    assert winner == 0
    assert tally.winner_label == "C"
    assert tally.counts == {"C": 3, "B": 2}
    assert not tally.uniform_tie


def test_majority_vote_all_distinct_flags_uniform_tie():
    winner, tally = majority_vote(["a", "b", "c", "d", "e"])
    assert winner == 0
    assert tally.uniform_tie


def test_majority_vote_singleton_and_no_answer():
    winner, tally = majority_vote(["A"])
    assert winner == 0 and tally.winner_label == "A"

    winner, tally = majority_vote([None, "B", None, "B"])
    assert winner == 1
    winner, tally = majority_vote([None, None])
    assert winner == 0 and tally.winner_label is None and tally.uniform_tie

    with pytest.raises(ValueError):
        majority_vote([])


def chain_with_feature_like(vectors):
    return CoEChain(embeddings=np.array(vectors, dtype=np.float64), count=1)


def test_coe_full_select_is_argmin_of_scores():
    rng = np.random.default_rng(4)
    chains = [CoEChain(embeddings=rng.normal(size=(4, 6)), count=3) for _ in range(5)]
    assert coe_full_select(chains) == argmin_select(consistency_scores(chains))


def test_coe_full_select_edge_cases():
    a = chain_with_feature_like([[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0]])
    assert coe_full_select([a, a, a]) == 0  # identical chains: lowest index
    b = chain_with_feature_like([[1.0, 0.0], [2.0, 0.0], [3.0, 0.0]])
    assert coe_full_select([a, b]) == 0  # two samples are always symmetric
    with pytest.raises(InsufficientSamplesError):
        coe_full_select([a])


def test_rouge_l():
    assert rouge_l_f((1, 2, 3), (1, 2, 3)) == 1.0
    assert rouge_l_f((1, 2), (3, 4)) == 0.0
    assert rouge_l_f((), ()) == 1.0
    assert rouge_l_f((1,), ()) == 0.0
    # lcs((1,2,3,4), (2,4)) = 2: P = 1, R = 1/2, F1 = 2/3
    assert rouge_l_f((2, 4), (1, 2, 3, 4)) == pytest.approx(2 / 3)


def test_ablation_distances():
    assert ablation_distance("string", (1, 2, 3), (1, 2, 3)) == 1.0
    assert ablation_distance("string", (1, 2), (3, 4)) == STRING_DISTANCE_SENTINEL
    assert ablation_distance("semantic-lastlayer", np.array([1.0, 0.0]), np.array([0.0, 1.0])) == 2.0
    with pytest.raises(ValueError):
        ablation_distance("edit", (1,), (2,))


def test_ablation_scorers_run_end_to_end():
    from stbon.scorers import make_scorer

    model = small_toy(7)
    params = SamplingParams(seed=3)
    for kind in ("semantic", "string"):
        result = run_stbon(
            model,
            StBoNConfig(n=3, max_len=40, sampling=params),
            (1,),
            scorer=make_scorer(kind),
        )
        assert 0 <= result.record.final < 3
