"""Collects one verdict line per acceptance criterion for the terminal summary."""

RESULTS: dict[int, str] = {}


def record(number: int, ok: bool, detail: str) -> str:
    line = f"ACCEPTANCE {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
    RESULTS[number] = line
    print(line)
    return line
