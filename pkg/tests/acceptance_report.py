"""Collects one PASS/FAIL/SKIP line per acceptance check for the terminal summary."""

LINES = []


def report(criterion, label, ok, detail=""):
    status = "SKIP" if ok is None else ("PASS" if ok else "FAIL")
    line = f"{status} [{criterion}] {label}" + (f" -- {detail}" if detail else "")
    LINES.append(line)
    print(line)
    return ok
