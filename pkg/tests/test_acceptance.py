"""Acceptance criteria 1-10, each at its stated tolerance.

Every test records one ``criterion N: PASS|FAIL`` line.  Under pytest the
lines appear in an "acceptance criteria" section of the terminal summary;
``python3 tests/test_acceptance.py`` runs the same checks and prints them
directly.
"""

import json
import sys
import time
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).parent))

from alignfreeze import evalstats  # noqa: E402
from alignfreeze.align_extract import (  # noqa: E402
    AlignmentSet,
    BilingualDictionary,
    SentencePair,
    candidate_links,
    dictionary_align,
    format_pharaoh,
    parse_pharaoh,
    symmetrize_gdfa,
)
from alignfreeze.cli import dispatch  # noqa: E402
from alignfreeze.encoder import (  # noqa: E402
    EncoderConfig,
    EncoderModel,
    FreezeStrategy,
    apply_freeze,
    backward,
    forward,
    init_model,
)
from alignfreeze.pipeline import (  # noqa: E402
    ExperimentSpec,
    TrainConfig,
    head_loss_grads,
    init_head,
    realign_batch_grads,
    realignment_corpus,
    run_experiment,
    run_realignment,
)
from alignfreeze.qe_filter import ScoredPair, filter_corpus  # noqa: E402
from alignfreeze.realign_loss import LossConfig, RealignBatch, contrastive_loss  # noqa: E402
from alignfreeze.tasks import SyntheticSpec, generate_bundle  # noqa: E402
from conftest import ACCEPTANCE_LINES  # noqa: E402
from oracles import (  # noqa: E402
    central_diff,
    max_rel_err,
    model_fd_error,
    naive_realign_loss,
    nearest_rank_retained,
    random_alignment,
)


def record(n, ok, detail):
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'} ({detail})"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def aset(links, n, m):
    return AlignmentSet(frozenset(links), n, m)


# --- 1: loss oracle -----------------------------------------------------------------


def test_criterion_1_loss_oracle():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    worst = 0.0
    for i in range(100):
        B, d = int(rng.integers(1, 9)), int(rng.integers(1, 17))
        T = (0.05, 0.1, 1.0)[i % 3]
        batch = RealignBatch.from_pairs(rng.standard_normal((B, d)), rng.standard_normal((B, d)))
        loss, _ = contrastive_loss(batch, LossConfig(temperature=T))
        worst = max(worst, abs(loss - naive_realign_loss(batch.reps, batch.partner, T)))
    single = 0.0
    for T in (0.05, 0.1, 1.0):
        b1 = RealignBatch.from_pairs(rng.standard_normal((1, 7)), rng.standard_normal((1, 7)))
        single = max(single, abs(contrastive_loss(b1, LossConfig(temperature=T))[0]))
    elapsed = time.perf_counter() - t0
    record(1, worst < 1e-6 and single <= 1e-9 and elapsed < 10,
           f"max |diff| {worst:.2e}, B=1 loss {single:.1e}, {elapsed:.1f}s")


# --- 2: gradient checks ---------------------------------------------------------------


def _perturbed_model(cfg, seed):
    m = init_model(cfg, seed, dtype=np.float64)
    rng = np.random.default_rng([seed, 9])
    for _, _, p in m.named_parameters():
        p += 0.1 * rng.standard_normal(p.shape)
    return m


def test_criterion_2_gradient_checks():
    t0 = time.perf_counter()
    h = 1e-4
    worst = {"encoder": 0.0, "loss": 0.0, "token_head": 0.0, "sentence_head": 0.0}
    configs = [(1, 16, 4), (2, 12, 5), (4, 8, 3), (2, 20, 4), (1, 10, 6)]
    for seed, (heads, ffn, n) in enumerate(configs):
        cfg = EncoderConfig(num_layers=2, hidden_dim=8, num_heads=heads, ffn_dim=ffn, vocab_size=16, max_seq_len=8)
        m = _perturbed_model(cfg, seed)
        rng = np.random.default_rng(seed)

        # encoder alone, random upstream on every hidden state
        ids = rng.integers(0, 16, size=(2, n))
        weights = [rng.standard_normal((2, n, 8)) for _ in range(3)]

        def enc_loss():
            acts = forward(m, ids)
            return sum(float((acts[k] * weights[k]).sum()) for k in range(3))

        g = backward(m, forward(m, ids), dict(enumerate(weights)))
        worst["encoder"] = max(worst["encoder"], model_fd_error(m, enc_loss, g, h))

        # realignment loss, directly on representations and through the encoder
        batch = RealignBatch.from_pairs(rng.standard_normal((3, 8)), rng.standard_normal((3, 8)))
        lcfg = LossConfig(temperature=(0.1, 1.0)[seed % 2])
        _, gr = contrastive_loss(batch, lcfg)
        num = central_diff(lambda: contrastive_loss(batch, lcfg)[0], batch.reps, h)
        worst["loss"] = max(worst["loss"], max_rel_err(gr, num))
        pairs = [(rng.integers(0, 8, n), rng.integers(8, 16, n), np.array([[0, 1], [1, 0], [n - 1, n - 1]]))]
        _, gl, _ = realign_batch_grads(m, pairs, lcfg)
        worst["loss"] = max(worst["loss"], model_fd_error(m, lambda: realign_batch_grads(m, pairs, lcfg)[0], gl, h))

        # both task heads, encoder and head parameters
        for kind in ("token_classifier", "sentence_classifier"):
            head = init_head(kind, 8, 3, seed=seed, dtype=np.float64)
            head.bias += 0.1 * rng.standard_normal(3)
            labels = rng.integers(0, 3, size=(2, n)) if kind == "token_classifier" else rng.integers(0, 3, size=2)

            def head_loss():
                return head_loss_grads(m, head, ids, labels)[0]

            _, hg, eg = head_loss_grads(m, head, ids, labels)
            err = max(
                model_fd_error(m, head_loss, eg, h),
                max_rel_err(hg["weight"], central_diff(head_loss, head.weight, h)),
                max_rel_err(hg["bias"], central_diff(head_loss, head.bias, h)),
            )
            key = "token_head" if kind == "token_classifier" else "sentence_head"
            worst[key] = max(worst[key], err)
    elapsed = time.perf_counter() - t0
    ok = all(v < 1e-4 for v in worst.values()) and elapsed < 60
    detail = ", ".join(f"{k} {v:.1e}" for k, v in worst.items())
    record(2, ok, f"{len(configs)} configs, max rel err {detail}, {elapsed:.1f}s")


# --- 3: freeze bit-exactness ---------------------------------------------------------------


def test_criterion_3_freeze_bit_exactness():
    gen = {
        "vocab_size": 30, "num_tags": 3, "sentence_len": [3, 6], "n_train": 10, "n_eval": 10,
        "n_parallel": 60, "languages": [{"name": "aa", "cipher_seed": 1, "reorder_prob": 0.0}],
        "master_seed": 3,
    }
    bundle = generate_bundle(SyntheticSpec.from_dict(gen))
    corpus = realignment_corpus(bundle)
    cfg = EncoderConfig(num_layers=6, hidden_dim=8, num_heads=2, ffn_dim=16,
                        vocab_size=bundle.table_size, max_seq_len=8)
    tcfg = TrainConfig(realign_steps=100, realign_batch_pairs=4, realign_lr=1e-2, seed=5)
    strategies = ["FrontHalf", "BackHalf"]
    strategies += [f"FreezeOnly({k})" for k in range(7)]
    strategies += [f"RealignOnly({k})" for k in range(7)]
    failures = []
    for text in strategies:
        strategy = FreezeStrategy.parse(text)
        frozen = apply_freeze(strategy, 6).frozen_blocks
        model = init_model(cfg, 0)
        before = {b: model.block_bytes(b) for b in model.blocks()}
        run_realignment(model, corpus, strategy, tcfg)
        kept = all(model.block_bytes(b) == before[b] for b in frozen)
        moved = any(model.block_bytes(b) != before[b] for b in model.blocks() if b not in frozen)
        if not (kept and moved):
            failures.append(text)
    record(3, not failures, f"{len(strategies)} strategies x 100 steps on L=6, failures: {failures or 'none'}")


# --- 4: GDFA ---------------------------------------------------------------------------------


def test_criterion_4_gdfa():
    rng = np.random.default_rng(4)
    bad = 0
    for _ in range(1000):
        n, m = int(rng.integers(1, 7)), int(rng.integers(1, 7))
        fwd = aset(random_alignment(rng, n, m, rng.uniform(0.1, 0.6)), n, m)
        bwd = aset(random_alignment(rng, n, m, rng.uniform(0.1, 0.6)), n, m)
        out = symmetrize_gdfa(fwd, bwd).links
        if not ((fwd.links & bwd.links) <= out <= (fwd.links | bwd.links)):
            bad += 1
        if symmetrize_gdfa(fwd, fwd) != fwd:
            bad += 1
    s = aset({(0, 1), (1, 0), (2, 2), (2, 3)}, 3, 4)
    fixtures = [
        symmetrize_gdfa(aset({(0, 0), (1, 1), (2, 2)}, 3, 3), aset({(0, 0), (1, 1)}, 3, 3)).links
        == {(0, 0), (1, 1), (2, 2)},
        symmetrize_gdfa(s, s) == s,
        symmetrize_gdfa(aset({(0, 1)}, 2, 2), aset({(1, 0)}, 2, 2)).links == {(0, 1), (1, 0)},
    ]
    record(4, bad == 0 and all(fixtures), f"1000 random pairs, {bad} violations, fixtures {sum(fixtures)}/3")


# --- 5: dictionary extraction ----------------------------------------------------------------


def test_criterion_5_dictionary_extraction():
    rng = np.random.default_rng(5)
    words = [f"w{i}" for i in range(6)] + ["same", "Same"]
    bad = 0
    for _ in range(1000):
        src = tuple(rng.choice(words, size=int(rng.integers(1, 8))))
        tgt = tuple(rng.choice(words, size=int(rng.integers(1, 8))))
        entries = {}
        for w in rng.choice(words, size=int(rng.integers(1, 6))):
            entries.setdefault(str(w).lower(), set()).update(rng.choice(words, size=int(rng.integers(1, 4))))
        pair, d = SentencePair(src, tgt), BilingualDictionary(entries)
        out = dictionary_align(pair, d).links
        s_idx = [s for s, _ in out]
        t_idx = [t for _, t in out]
        one_to_one = len(set(s_idx)) == len(s_idx) and len(set(t_idx)) == len(t_idx)
        no_identical = all(pair.src_tokens[s].casefold() != pair.tgt_tokens[t].casefold() for s, t in out)
        if not (one_to_one and no_identical and out <= candidate_links(pair, d)):
            bad += 1
    taxi = dictionary_align(SentencePair.from_text("taxi", "taxi"), BilingualDictionary({"taxi": {"taxi"}}))
    record(5, bad == 0 and len(taxi) == 0, f"1000 random instances, {bad} violations, taxi -> {len(taxi)} links")


# --- 6: desk-scale transfer analog ------------------------------------------------------------


def test_criterion_6_desk_scale_transfer():
    t0 = time.perf_counter()
    spec = ExperimentSpec.from_dict({"strategies": ["FinetuneOnly", "Full", "FrontHalf"]})
    target = next(t.name for t in SyntheticSpec().languages if t.reorder_prob == 0.0)
    report = run_experiment(spec)
    elapsed = time.perf_counter() - t0
    full = report.verdict("Full", target)
    front = report.verdict("FrontHalf", target)
    base = report.stats("FinetuneOnly", target)
    ok = full.direction == "up" and front.direction in ("up", "same") and elapsed < 300
    record(6, ok,
           f"{target}: FinetuneOnly {base}, Full {report.stats('Full', target)} -> {full.direction}, "
           f"FrontHalf {report.stats('FrontHalf', target)} -> {front.direction}, "
           f"{len(report.seeds)} seeds, {elapsed:.0f}s total")


# --- 7: significance fixtures -----------------------------------------------------------------


def test_criterion_7_significance_fixtures():
    a = evalstats.significance(evalstats.RunStats(73.8, 0.6, 5), evalstats.RunStats(77.6, 0.3, 5))
    b = evalstats.significance(evalstats.RunStats(77.1, 0.7, 5), evalstats.RunStats(75.3, 0.6, 5))
    counts = evalstats.count_verdicts([a, b])
    record(7, a.direction == "up" and b.direction == "down" and counts == (1, 1, 0),
           f"{a.direction}, {b.direction}, counts {counts}")


# --- 8: QE filtering -------------------------------------------------------------------------


EXPECTED_RETAINED = {0: 10, 25: 8, 37: 7, 50: 6, 62: 4, 75: 3}


def test_criterion_8_qe_filter():
    rng = np.random.default_rng(8)
    scores = rng.permutation(np.arange(1, 11) / 10)
    pairs = [ScoredPair(i, float(s)) for i, s in enumerate(scores)]
    counts = {p: len(filter_corpus(pairs, p)) for p in EXPECTED_RETAINED}
    oracle = {p: nearest_rank_retained(list(scores), p) for p in EXPECTED_RETAINED}
    bad = 0
    for _ in range(100):
        n = int(rng.integers(1, 40))
        vals = np.round(rng.random(n), int(rng.integers(1, 4)))  # rounding creates ties
        sp = [ScoredPair(i, float(v)) for i, v in enumerate(vals)]
        kept = [{x.index for x in filter_corpus(sp, p)} for p in sorted(EXPECTED_RETAINED)]
        if kept[0] != set(range(n)) or any(not later <= earlier for earlier, later in zip(kept, kept[1:])):
            bad += 1
    ok = counts == EXPECTED_RETAINED == oracle and bad == 0
    record(8, ok, f"counts {counts}, monotonicity violations {bad}/100")


# --- 9: CLI determinism ----------------------------------------------------------------------


def test_criterion_9_cli_determinism(tmp_path):
    spec = {
        "model": {"num_layers": 2, "hidden_dim": 8, "num_heads": 2, "ffn_dim": 16},
        "task": {"kind": "token", "generator": {
            "vocab_size": 30, "num_tags": 3, "sentence_len": [3, 6], "n_train": 40, "n_eval": 20,
            "n_parallel": 40, "master_seed": 1,
        }},
        "strategies": ["FinetuneOnly", "Full", "BackHalf"],
        "train": {"realign_steps": 10, "realign_batch_pairs": 4, "finetune_epochs": 1},
    }
    cfg = tmp_path / "spec.json"
    cfg.write_text(json.dumps(spec), encoding="utf-8")
    codes = [dispatch(["experiment", "--config", str(cfg), "--seeds", "1,2", "--out", str(tmp_path / d)])
             for d in ("a", "b")]
    a = (tmp_path / "a" / "report.json").read_bytes()
    b = (tmp_path / "b" / "report.json").read_bytes()
    record(9, codes == [0, 0] and a == b, f"exit codes {codes}, report.json {len(a)} bytes, identical {a == b}")


# --- 10: serialization -----------------------------------------------------------------------


def test_criterion_10_serialization(tmp_path):
    ok_models = True
    for seed, dtype in ((0, np.float32), (1, np.float64)):
        m = init_model(EncoderConfig(num_layers=3, hidden_dim=8, num_heads=2, ffn_dim=16, vocab_size=20), seed, dtype)
        m.save(tmp_path / "a.afm")
        EncoderModel.load(tmp_path / "a.afm").save(tmp_path / "b.afm")
        ok_models &= (tmp_path / "a.afm").read_bytes() == (tmp_path / "b.afm").read_bytes()
    rng = np.random.default_rng(10)
    bad = 0
    for _ in range(100):
        n, m_ = int(rng.integers(1, 12)), int(rng.integers(1, 12))
        a = aset(random_alignment(rng, n, m_, rng.uniform(0.0, 0.5)), n, m_)
        if parse_pharaoh(format_pharaoh(a), n, m_) != a:
            bad += 1
    record(10, ok_models and bad == 0, f"model bytes identical {ok_models}, Pharaoh mismatches {bad}/100")


if __name__ == "__main__":
    import tempfile

    failed = 0
    for name, fn in sorted(
        ((k, v) for k, v in globals().items() if k.startswith("test_criterion_")),
        key=lambda kv: int(kv[0].split("_")[2]),
    ):
        try:
            if "tmp_path" in fn.__code__.co_varnames[: fn.__code__.co_argcount]:
                with tempfile.TemporaryDirectory() as d:
                    fn(Path(d))
            else:
                fn()
        except AssertionError:
            failed += 1
    sys.exit(1 if failed else 0)
