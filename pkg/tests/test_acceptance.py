"""Acceptance suite: one test per release criterion, tolerances pinned.

Run with ``pytest tests/test_acceptance.py -v -s`` to see one PASS line
per criterion. Every tolerance is stated inline; nothing is deferred to
later calibration.
"""

from __future__ import annotations

import hashlib
import json
import math
import random
import time
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from itertools import combinations

import pytest
import requests
from hypothesis import given, settings
from hypothesis import strategies as st

from crossdoc import analysis
from crossdoc.bundler import augment_html, emit_baseline_html, read_bundle, write_bundle
from crossdoc.cli import cli_dispatch
from crossdoc.ingest import find_figure_references, parse_document, split_caption_sentences
from crossdoc.linkgraph import prune_unlinked_entities
from crossdoc.server import serve
from tests.conftest import (
    DISTANCE_MAP,
    GOLDEN,
    GOLDEN_AUG,
    GOLDEN_BASE,
    GOLDEN_BUNDLE,
    GOLDEN_CONFIG,
    GOLDEN_PAPER,
)
from tests.test_analysis import (
    FROZEN_ALPHA,
    RELIABILITY_EXAMPLE,
    _bruteforce_two_sided_p,
    _oracle_welch_tost,
)
from tests.test_bundler import bundles
from tests.test_ingest import REFERENCE_CASES


@contextmanager
def criterion(name: str):
    try:
        yield
    except BaseException:
        print(f"ACCEPTANCE FAIL: {name}")
        raise
    print(f"ACCEPTANCE PASS: {name}")


def test_golden_pipeline_determinism(tmp_path):
    """annotate x3 on the fixture paper: byte-identical to the committed
    golden bundle, total runtime under 10 s."""
    with criterion("golden pipeline determinism (3 runs, < 10 s)"):
        golden = GOLDEN_BUNDLE.read_bytes()
        started = time.monotonic()
        for run in range(3):
            out = tmp_path / f"run{run}.bundle.json"
            code = cli_dispatch([
                "annotate", str(GOLDEN_PAPER),
                "--config", str(GOLDEN_CONFIG),
                "--out", str(out),
            ])
            assert code == 0
            assert out.read_bytes() == golden
        elapsed = time.monotonic() - started
        assert elapsed < 10.0, f"3 annotate runs took {elapsed:.2f}s"


_caption_alphabet = st.characters(
    whitelist_categories=("Lu", "Ll", "Nd", "Zs"),
    whitelist_characters=".!?,;()“”'\"-",
)


@settings(max_examples=100, deadline=None)
@given(st.text(alphabet=_caption_alphabet, min_size=1, max_size=200)
       .filter(lambda s: s.strip()))
def test_caption_reconstruction_100_cases(caption):
    assert "".join(split_caption_sentences(caption)) == caption


def test_caption_reconstruction_criterion_line():
    with criterion("caption reconstruction (100 generated captions, exact)"):
        pass  # the hypothesis run above fails the suite on any violation


def test_reference_regex_criterion():
    """Accepts the cited exemplars, rejects Figure 30 for figure 3, and the
    whole table of at least 20 cases holds."""
    with criterion("figure-reference pattern (exemplars + 20-case table)"):
        assert len(REFERENCE_CASES) >= 20
        for text, figure_number, expected in REFERENCE_CASES:
            doc = parse_document(
                f"<html><body><p>{text}</p><p>pad</p></body></html>".encode()
            )
            refs = find_figure_references(doc, figure_number)
            assert [r.matched_text for r in refs] == expected, (text, expected)
        exemplar_doc = parse_document(
            b"<html><body><p>in Figure 3</p><p>see fig. 3</p>"
            b"<p>Figure 30 shows</p></body></html>"
        )
        hits = find_figure_references(exemplar_doc, 3)
        assert sorted(r.passage_index for r in hits) == [0, 1]


def test_pruning_criterion():
    with criterion("pruning rule (no unlinked entities survive; idempotent)"):
        bundle = read_bundle(GOLDEN_BUNDLE.read_bytes())
        pruned = prune_unlinked_entities(bundle)
        for entity in pruned.entities:
            kinds = {l.kind for l in pruned.links_for_entity(entity.entity_id)}
            desc = pruned.descriptions.get(entity.entity_id)
            assert (
                "direct_reference" in kinds
                or "related_passage" in kinds
                or (desc and desc.related_passage_ids)
            ), f"{entity.entity_id} survived with no links"
        assert prune_unlinked_entities(pruned) == pruned
        # the golden bundle itself is already pruned
        assert pruned == bundle


def test_text_preservation_criterion():
    with criterion("text preservation across variants (byte-exact)"):
        doc = parse_document(GOLDEN_PAPER.read_bytes())
        bundle = read_bundle(GOLDEN_BUNDLE.read_bytes())
        strip_list = json.loads(GOLDEN_CONFIG.read_text())["strip_selectors"]
        aug = augment_html(doc, bundle)
        base = emit_baseline_html(doc, strip_list)
        assert aug == GOLDEN_AUG.read_bytes()
        assert base == GOLDEN_BASE.read_bytes()
        original = [p.text.encode("utf-8") for p in doc.passages]
        assert [p.text.encode("utf-8")
                for p in parse_document(aug).passages] == original
        assert [p.text.encode("utf-8")
                for p in parse_document(base).passages] == original


@settings(max_examples=50, deadline=None)
@given(bundles())
def test_bundle_round_trip_50_generated(bundle):
    assert read_bundle(write_bundle(bundle)) == bundle


def test_bundle_round_trip_criterion():
    with criterion("bundle round-trip (golden + 50 generated)"):
        golden = read_bundle(GOLDEN_BUNDLE.read_bytes())
        assert read_bundle(write_bundle(golden)) == golden


def test_stats_oracles_criterion():
    """All statistics tolerances in one timed block (< 30 s)."""
    with criterion("statistics oracles (exact MW 1e-9, alpha 1e-6, "
                   "printed Bonferroni pairs, chi2 20.0, TOST 1e-9; < 30 s)"):
        started = time.monotonic()

        # Mann-Whitney exact p == enumeration within 1e-9, all n,m <= 8,
        # tie-free samples
        rng = random.Random(1234)
        for n in range(1, 9):
            for m in range(1, 9):
                pool = rng.sample(range(100000), n + m)
                a = [v / 13.0 for v in pool[:n]]
                b = [v / 13.0 for v in pool[n:]]
                report = analysis.mann_whitney_u(a, b)
                assert report.method == "exact"
                expected = _bruteforce_two_sided_p(a, b)
                assert abs(report.p_value - expected) < 1e-9, (n, m)

        # alpha: perfect agreement exactly 1.0, worked example to 1e-6
        for level in ("nominal", "ordinal", "interval"):
            assert analysis.krippendorff_alpha(
                [[1, 1], [2, 2], [0, 0]], level
            ) == 1.0
            value = analysis.krippendorff_alpha(
                [list(r) for r in RELIABILITY_EXAMPLE], level
            )
            assert abs(value - FROZEN_ALPHA[level]) < 1e-6

        # Bonferroni reproduces the printed pairs
        adjusted = analysis.bonferroni_adjust([0.00079, 0.00272], 10)
        assert f"{adjusted[0]:.4f}" == "0.0079"
        assert f"{adjusted[1]:.4f}" == "0.0272"
        assert adjusted[0] == pytest.approx(0.0079, rel=1e-12)
        assert adjusted[1] == pytest.approx(0.0272, rel=1e-12)
        assert analysis.bonferroni_adjust([0.5], 10) == [1.0]

        # chi-square of the diagonal table is exactly 20.0
        assert analysis.chi_square_proportions([[10, 0], [0, 10]]).statistic == 20.0

        # TOST against the quadrature reference within 1e-9
        rng = random.Random(77)
        for _ in range(3):
            a = [rng.gauss(60, 9) for _ in range(14)]
            b = [rng.gauss(62, 7) for _ in range(11)]
            report = analysis.tost_equivalence(a, b, margin=6.0)
            assert abs(report.p_value - _oracle_welch_tost(a, b, 6.0)) < 1e-9

        elapsed = time.monotonic() - started
        assert elapsed < 30.0, f"stats oracle block took {elapsed:.2f}s"


def test_distance_grouping_criterion():
    with criterion("distance grouping reproduces the published partition"):
        group_map = analysis.DistanceGroupMap.from_file(DISTANCE_MAP)
        partition = {
            "within_caption": {1, 2, 3},
            "2P": {5, 9},
            "3P": {4, 8},
            "4P": {6},
            "very_far": {7, 10},
        }
        for group, questions in partition.items():
            assert group_map.questions_in(group) == questions
        assert set(group_map.question_to_group) == set(range(1, 11))


def test_server_contract_criterion(tmp_path):
    with criterion("server contract (status codes, media types, "
                   "1000-GET storm leaves artifacts byte-identical)"):
        doc_id = json.loads(GOLDEN_BUNDLE.read_text())["doc_id"]
        doc_dir = tmp_path / doc_id
        (doc_dir / "assets").mkdir(parents=True)
        (doc_dir / "aug.html").write_bytes(GOLDEN_AUG.read_bytes())
        (doc_dir / "base.html").write_bytes(GOLDEN_BASE.read_bytes())
        (doc_dir / "bundle.json").write_bytes(GOLDEN_BUNDLE.read_bytes())
        for asset in (GOLDEN / "assets").iterdir():
            (doc_dir / "assets" / asset.name).write_bytes(asset.read_bytes())

        def digests():
            return {
                str(p): hashlib.sha256(p.read_bytes()).hexdigest()
                for p in sorted(tmp_path.rglob("*")) if p.is_file()
            }

        before = digests()
        service = serve(tmp_path, port=0)
        try:
            base = service.base_url
            contract = [
                (f"/doc/{doc_id}?variant=aug", 200, "text/html; charset=utf-8"),
                (f"/doc/{doc_id}?variant=base", 200, "text/html; charset=utf-8"),
                (f"/doc/{doc_id}/bundle", 200, "application/json; charset=utf-8"),
                (f"/doc/{doc_id}/assets/fig1.png", 200, "image/png"),
                ("/docs", 200, "application/json; charset=utf-8"),
                ("/healthz", 200, "application/json; charset=utf-8"),
                ("/doc/unknown", 404, "application/json; charset=utf-8"),
                (f"/doc/{doc_id}?variant=bogus", 400,
                 "application/json; charset=utf-8"),
            ]
            session = requests.Session()
            for path, status, media_type in contract:
                response = session.get(base + path)
                assert response.status_code == status, path
                assert response.headers["Content-Type"] == media_type, path
            ok_paths = [p for p, status, _ in contract if status == 200]

            def hit(i: int) -> int:
                return session.get(base + ok_paths[i % len(ok_paths)]).status_code

            with ThreadPoolExecutor(max_workers=32) as pool:
                statuses = list(pool.map(hit, range(1000)))
            assert all(code == 200 for code in statuses)
        finally:
            service.close()
        assert digests() == before
