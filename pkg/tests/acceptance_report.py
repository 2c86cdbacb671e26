"""Collects one verdict line per acceptance criterion."""

RESULTS: dict[int, tuple[bool, str]] = {}


def report(number: int, title: str, ok: bool, detail: str) -> None:
    RESULTS[number] = (ok, f"{title}: {detail}")
    print(f"criterion {number:2d} {'PASS' if ok else 'FAIL'}  {title}: {detail}")
    assert ok, detail


def summary_lines() -> list[str]:
    return [f"criterion {n:2d} {'PASS' if ok else 'FAIL'}  {text}" for n, (ok, text) in sorted(RESULTS.items())]
