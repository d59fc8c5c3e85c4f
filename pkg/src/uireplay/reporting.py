"""Aggregation of replay reports: accuracy per arm and success attribution.

Final-success steps partition into four buckets by which arms were also right
on their own: both arms, image arm only, layout arm only, neither. The bucket
counts always sum to the number of final successes. A success with neither
arm right is possible: the blended point can land inside the target region
even though neither arm's point alone would, and bypassed gestures (back,
free-typed text) succeed without consulting either matcher.
"""

from __future__ import annotations

from dataclasses import dataclass

from .replay import ReplayReport


@dataclass(frozen=True)
class ReportSummary:
    steps: int
    final_successes: int
    image_successes: int
    layout_successes: int
    both_arms: int
    image_only: int
    layout_only: int
    neither_arm: int

    @property
    def final_accuracy(self) -> float:
        return self.final_successes / self.steps if self.steps else 0.0

    @property
    def image_accuracy(self) -> float:
        return self.image_successes / self.steps if self.steps else 0.0

    @property
    def layout_accuracy(self) -> float:
        return self.layout_successes / self.steps if self.steps else 0.0


def summarize(reports: list[ReplayReport]) -> ReportSummary:
    steps = final = image = layout = both = img_only = lay_only = neither = 0
    for report in reports:
        for o in report.outcomes:
            steps += 1
            image += o.image_ok
            layout += o.layout_ok
            if not o.final_ok:
                continue
            final += 1
            if o.image_ok and o.layout_ok:
                both += 1
            elif o.image_ok:
                img_only += 1
            elif o.layout_ok:
                lay_only += 1
            else:
                neither += 1
    return ReportSummary(
        steps=steps,
        final_successes=final,
        image_successes=image,
        layout_successes=layout,
        both_arms=both,
        image_only=img_only,
        layout_only=lay_only,
        neither_arm=neither,
    )


def render_summary(reports: list[ReplayReport]) -> str:
    """Human-readable accuracy table for one or more replay reports."""
    lines = []
    header = f"{'report':<40} {'steps':>5} {'final':>6} {'image':>6} {'layout':>6}"
    lines.append(header)
    lines.append("-" * len(header))
    for report in reports:
        s = summarize([report])
        label = f"{report.script_id} @ {report.device_id}"
        lines.append(
            f"{label:<40.40} {s.steps:>5} {s.final_accuracy:>6.1%} "
            f"{s.image_accuracy:>6.1%} {s.layout_accuracy:>6.1%}"
        )
    total = summarize(reports)
    lines.append("-" * len(header))
    lines.append(
        f"{'overall':<40} {total.steps:>5} {total.final_accuracy:>6.1%} "
        f"{total.image_accuracy:>6.1%} {total.layout_accuracy:>6.1%}"
    )
    lines.append("")
    lines.append(
        "final successes by arm agreement: "
        f"both={total.both_arms} image_only={total.image_only} "
        f"layout_only={total.layout_only} neither={total.neither_arm} "
        f"(sum={total.both_arms + total.image_only + total.layout_only + total.neither_arm}, "
        f"final={total.final_successes})"
    )
    return "\n".join(lines)
