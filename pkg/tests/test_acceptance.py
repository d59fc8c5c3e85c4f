"""Acceptance criteria, one test per criterion, each printing PASS/FAIL.

Run with `pytest tests/test_acceptance.py -v -s` to see the per-criterion
lines. Tolerances are fixed here and nowhere else.
"""

import math
import time

import numpy as np
import pytest

from uireplay.config import EngineConfig
from uireplay.device import SimulatedDevice, load_session
from uireplay.features import (
    FeatureSet,
    Keypoint,
    MatchPair,
    estimate_homography,
    extract_features,
    knn_match,
    locate_candidates,
    ratio_filter,
)
from uireplay.geometry import PixelBox
from uireplay.imaging import GrayImage
from uireplay.layout import characterize, filter_widget_boxes
from uireplay.recorder import event_from_mapping, record_events
from uireplay.replay import (
    ReplayReport,
    StepOutcome,
    arm_point,
    replay_accuracy,
    replay_script,
    resolve_target,
)
from uireplay.reporting import summarize
from uireplay.script import OpKind
from uireplay.synthetic import (
    build_session,
    events_for_walk,
    make_flow_app,
    mutate_content,
    textured_patch,
)

from conftest import box_grid, gray_from_array, paste_patch


def verdict(name: str, ok: bool, detail: str = ""):
    print(f"{'PASS' if ok else 'FAIL'} {name}" + (f"  [{detail}]" if detail else ""))
    assert ok, f"{name}: {detail}"


# Shared round-trip corpus: 5 sessions, recorded and replayed once.


@pytest.fixture(scope="module")
def roundtrip(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("roundtrip")
    corpus = []
    for i in range(5):
        app, walk = make_flow_app(f"rt{i}", screens=4, seed=101 + i)
        session_dir = build_session(app, (540, 1080), tmp / f"sess{i}")
        events = [event_from_mapping(e) for e in events_for_walk(app, walk)]
        corpus.append((app, session_dir, events))

    started = time.monotonic()
    runs = []
    for app, session_dir, events in corpus:
        device = SimulatedDevice(load_session(session_dir))
        script, expectations, _ = record_events(device, events, EngineConfig())
        replay_device = SimulatedDevice(load_session(session_dir))
        report = replay_script(script, replay_device, EngineConfig(), expectations)
        runs.append({"script": script, "session_dir": session_dir, "report": report})
    elapsed = time.monotonic() - started
    return {"runs": runs, "elapsed": elapsed}


class TestRoundTripFidelity:
    def test_accuracy_one_under_time_budget(self, roundtrip):
        total_steps = sum(len(r["report"].outcomes) for r in roundtrip["runs"])
        sessions = len(roundtrip["runs"])
        accuracies = [replay_accuracy(r["report"]) for r in roundtrip["runs"]]
        ok = (
            total_steps >= 50
            and sessions >= 5
            and all(a == 1.0 for a in accuracies)
            and roundtrip["elapsed"] < 60.0
        )
        verdict(
            "round-trip fidelity (accuracy 1.0, >=50 steps, <60 s)",
            ok,
            f"{sessions} sessions, {total_steps} steps, "
            f"accuracies={accuracies}, {roundtrip['elapsed']:.1f} s",
        )


class TestCrossResolutionReplay:
    def test_paired_devices_with_content_mutation(self, tmp_path):
        app, walk = make_flow_app("xres", screens=3, seed=301)
        mutated_ids = {"s0_field", "s0_card1", "s1_menu", "s2_field"}
        replay_app = mutate_content(app, mutated_ids)

        record_dir = build_session(app, (1080, 2244), tmp_path / "record")
        replay_dir = build_session(replay_app, (720, 1544), tmp_path / "replay")

        device = SimulatedDevice(load_session(record_dir))
        events = [event_from_mapping(e) for e in events_for_walk(app, walk)]
        script, expectations, _ = record_events(device, events, EngineConfig())

        report = replay_script(
            script,
            SimulatedDevice(load_session(replay_dir)),
            EngineConfig(gamma=0.5),
            expectations,
        )
        accuracy = replay_accuracy(report)

        mutated_steps = [
            o for o, e in zip(report.outcomes, expectations) if e.widget_id in mutated_ids
        ]
        layout_wins = sum(o.layout_ok for o in mutated_steps)
        image_wins = sum(o.image_ok for o in mutated_steps)
        ok = accuracy >= 0.9 and len(mutated_steps) >= 3 and layout_wins >= image_wins
        verdict(
            "cross-resolution replay (1080x2244 -> 720x1544, gamma=0.5)",
            ok,
            f"accuracy={accuracy:.3f}, mutated steps={len(mutated_steps)}, "
            f"layout_ok={layout_wins} >= image_ok={image_wins}",
        )


class TestFeatureLocalization:
    def run_fixtures(self):
        rng = np.random.default_rng(424242)
        screen_w, screen_h = 360, 640
        diag = math.hypot(screen_w, screen_h)
        patch = textured_patch(104, 76, seed=90210)[:, :, 0]  # gray channel
        widget = gray_from_array(patch)
        results = []
        for _ in range(100):
            scale = float(rng.uniform(0.8, 1.2))
            angle = float(rng.uniform(-10.0, 10.0))
            cx = float(rng.uniform(90, screen_w - 90))
            cy = float(rng.uniform(70, screen_h - 70))
            screen = np.full((screen_h, screen_w), 228, dtype=np.uint8)
            screen = paste_patch(screen, patch, (cx, cy), scale, angle)
            cands = locate_candidates(widget, gray_from_array(screen), EngineConfig())
            if not cands:
                results.append((None, math.inf))
                continue
            bx, by = cands[0].box.center
            results.append((cands[0], math.hypot(bx - cx, by - cy)))
        hits = sum(1 for _, err in results if err < 0.03 * diag)
        return results, hits

    def test_hundred_paste_fixtures(self):
        results_a, hits = self.run_fixtures()
        results_b, _ = self.run_fixtures()
        deterministic = repr(results_a) == repr(results_b)
        ok = hits >= 95 and deterministic
        verdict(
            "feature-matching localization (<3% diag in >=95/100, deterministic)",
            ok,
            f"hits={hits}/100, deterministic={deterministic}",
        )


class TestRatioTestSoundness:
    def test_thousand_pairs_against_predicate(self):
        rng = np.random.default_rng(77)
        pairs = []
        for i in range(1000):
            second = float(rng.uniform(0, 4))
            if i % 50 == 0:
                first = second = 0.0  # duplicate-source pairs
            else:
                first = float(rng.uniform(0, second)) if second > 0 else 0.0
            pairs.append(MatchPair(i, i, first, second))

        delta = 0.5
        ours = ratio_filter(pairs, delta)
        oracle = [
            p for p in pairs if p.d_second_min == 0.0 or p.d_min / p.d_second_min < delta
        ]
        exact = ours == oracle

        previous: list[MatchPair] = []
        monotone = True
        for d in (0.3, 0.5, 0.7, 0.999):
            kept = ratio_filter(pairs, d)
            if not set(id(p) for p in previous) <= set(id(p) for p in kept):
                monotone = False
            previous = kept
        ok = exact and monotone
        verdict(
            "ratio test literal soundness (1000 pairs exact, delta monotone)",
            ok,
            f"exact={exact}, monotone over (0.3, 0.5, 0.7, 0.999)={monotone}",
        )


def _feature_set(desc: np.ndarray) -> FeatureSet:
    kps = tuple(Keypoint(float(i), 0.0, 1.0, 0.0) for i in range(desc.shape[0]))
    return FeatureSet(kps, desc)


class TestKnnExactness:
    def test_twenty_instances_vs_brute_force(self):
        rng = np.random.default_rng(555)
        all_equal = True
        sizes = []
        for _ in range(20):
            n_source = int(rng.integers(2, 5001))
            n_target = int(rng.integers(1, 250))
            sizes.append(n_source)
            source = rng.random((n_source, 128))
            target = rng.random((n_target, 128))
            source /= np.linalg.norm(source, axis=1, keepdims=True)
            target /= np.linalg.norm(target, axis=1, keepdims=True)
            pairs = knn_match(_feature_set(target), _feature_set(source))
            # brute-force all-pairs oracle
            d = np.linalg.norm(target[:, None, :] - source[None, :, :], axis=2)
            nearest = np.argmin(d, axis=1)
            part = np.partition(d, 1, axis=1)
            for i, p in enumerate(pairs):
                if (
                    p.source_index != nearest[i]
                    or abs(p.d_min - part[i, 0]) > 1e-9
                    or abs(p.d_second_min - part[i, 1]) > 1e-9
                ):
                    all_equal = False
        verdict(
            "KNN exactness (20 instances <=5000 descriptors vs brute force)",
            all_equal,
            f"max source size={max(sizes)}",
        )


class TestHomographyRecovery:
    def test_hundred_trials_sixty_percent_outliers(self):
        rng = np.random.default_rng(808)
        successes = 0
        for trial in range(100):
            n_in, n_out = 16, 24
            pts = rng.random((n_in, 2)) * 260 + 10
            theta = float(rng.uniform(-0.4, 0.4))
            s = float(rng.uniform(0.7, 1.4))
            t = rng.uniform(-60, 60, size=2)
            rot = np.array(
                [[math.cos(theta), -math.sin(theta)], [math.sin(theta), math.cos(theta)]]
            )
            mapped = (pts @ rot.T) * s + t + rng.uniform(-0.2, 0.2, (n_in, 2))
            src = np.vstack([pts, rng.random((n_out, 2)) * 260 + 10])
            dst = np.vstack([mapped, rng.random((n_out, 2)) * 260 + 10])
            order = rng.permutation(n_in + n_out)
            matches = [MatchPair(i, i, 0.1, 1.0) for i in range(n_in + n_out)]
            target = _feature_set_points(src[order])
            source = _feature_set_points(dst[order])
            result = estimate_homography(matches, target, source, seed=trial)
            if result is None:
                continue
            hom, _ = result
            corners = np.array([[0, 0], [280, 0], [280, 280], [0, 280]], dtype=float)
            truth = (corners @ rot.T) * s + t
            if np.abs(hom.project(corners) - truth).max() < 1.0:
                successes += 1
        verdict(
            "homography recovery (60% outliers, <1 px corners, >=95/100)",
            successes >= 95,
            f"successes={successes}/100",
        )


def _feature_set_points(points: np.ndarray) -> FeatureSet:
    kps = tuple(Keypoint(float(x), float(y), 1.0, 0.0) for x, y in points)
    desc = np.zeros((len(kps), 128))
    desc[np.arange(len(kps)), np.arange(len(kps)) % 128] = 1.0
    return FeatureSet(kps, desc)


class TestLayoutOracleEquivalence:
    def test_fifty_grids_and_filter_rules(self):
        matches = 0
        for trial in range(50):
            rng = np.random.default_rng(9000 + trial)
            rows = int(rng.integers(1, 6))
            cols = int(rng.integers(1, 6))
            res = (1000, 2000)
            gap_limit = 0.05 * res[1]
            gap_y = int(rng.choice([20, 60, 120, 180, 260]))
            boxes = box_grid(
                rows, cols,
                int(rng.integers(110, 180)), int(rng.integers(60, 150)),
                gap_x=40, gap_y=gap_y,
            )
            layout = characterize(boxes, res)
            expected = []
            g = line = 0
            for r in range(rows):
                if r > 0:
                    if gap_y > gap_limit:
                        g += 1
                        line = 0
                    else:
                        line += 1
                expected.extend((g, line, c) for c in range(cols))
            if [e.address for e in layout.entries] == expected:
                matches += 1

        # R1: 2% of a 1080-wide screen is 21.6 px
        r1_drop = filter_widget_boxes([PixelBox(0, 0, 20, 20)], (1080, 2000)) == []
        r1_keep = filter_widget_boxes([PixelBox(0, 0, 21, 999)], (1080, 2000)) != []
        # R2: inner 700-wide box inside a card survives on a 1080 screen (>=648)
        outer = PixelBox(50, 500, 949, 799)
        wide_inner = PixelBox(100, 550, 799, 749)
        narrow_inner = PixelBox(100, 550, 399, 629)
        kept = filter_widget_boxes([outer, wide_inner], (1080, 2000))
        r2_keep = wide_inner in kept
        r2_drop = narrow_inner not in filter_widget_boxes([outer, narrow_inner], (1080, 2000))
        # R3: 1% of 1000x2000 is 20000 px^2; 199x99 = 19701 falls short
        r3_drop = filter_widget_boxes([PixelBox(0, 0, 198, 98)], (1000, 2000)) == []
        r3_keep = filter_widget_boxes([PixelBox(0, 0, 199, 100)], (1000, 2000)) != []

        rules = all([r1_drop, r1_keep, r2_keep, r2_drop, r3_drop, r3_keep])
        ok = matches == 50 and rules
        verdict(
            "layout oracle equivalence (50/50 grids, R1/R2/R3 arithmetic)",
            ok,
            f"grids={matches}/50, rules={rules}",
        )


class TestFusionEndpoints:
    def test_twenty_fixtures_exact(self, roundtrip):
        checked = 0
        exact = True
        for run in roundtrip["runs"]:
            if checked >= 20:
                break
            device = SimulatedDevice(load_session(run["session_dir"]))
            cache: dict = {}
            replayer = SimulatedDevice(load_session(run["session_dir"]))
            for step, outcome in zip(run["script"].steps, run["report"].outcomes):
                if checked >= 20:
                    break
                if step.op.kind is OpKind.BACK:
                    replayer.dispatch(step.op, outcome.dispatched_point)
                    continue
                screen = replayer.capture()
                res = replayer.resolution
                for gamma, pick in ((1.0, "image"), (0.0, "layout")):
                    resolved = resolve_target(
                        step, screen, res, EngineConfig(gamma=gamma), cache=cache
                    )
                    choice = (
                        resolved.image_choice if pick == "image" else resolved.layout_choice
                    )
                    if resolved.point is None or choice is None:
                        exact = False
                        continue
                    if resolved.point != arm_point(choice, step, res):
                        exact = False
                checked += 1
                replayer.dispatch(step.op, outcome.dispatched_point)
        ok = exact and checked >= 20
        verdict(
            "fusion endpoints (gamma=1 / gamma=0 literal equality, 20 fixtures)",
            ok,
            f"fixtures={checked}, exact={exact}",
        )


class TestReportArithmetic:
    def test_buckets_partition_final_successes(self, roundtrip):
        reports = [run["report"] for run in roundtrip["runs"]]
        # add synthetic outcomes covering every flag combination
        combos = [
            (True, True, True), (True, True, False), (True, False, True),
            (True, False, False), (False, True, True), (False, False, False),
        ]
        outcomes = tuple(
            StepOutcome(
                index=i, image_candidate=None, layout_candidate=None,
                dispatched_point=None, success=final, image_ok=img, layout_ok=lay,
                final_ok=final, note="bypass" if final else "missing widget",
            )
            for i, (final, img, lay) in enumerate(combos)
        )
        reports = reports + [ReplayReport("synthetic", "d", outcomes)]
        summary = summarize(reports)
        bucket_sum = (
            summary.both_arms + summary.image_only + summary.layout_only + summary.neither_arm
        )
        ok = bucket_sum == summary.final_successes and summary.steps > 0
        verdict(
            "report arithmetic (I/L/F buckets partition final successes)",
            ok,
            f"both={summary.both_arms} image_only={summary.image_only} "
            f"layout_only={summary.layout_only} neither={summary.neither_arm} "
            f"sum={bucket_sum} final={summary.final_successes}",
        )
