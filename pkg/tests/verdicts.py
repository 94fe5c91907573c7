"""Collects one PASS/FAIL line per acceptance criterion for the terminal summary."""
LINES = []


def record(criterion, ok, detail=""):
    line = f"criterion {criterion}: {'PASS' if ok else 'FAIL'}" + (f"  {detail}" if detail else "")
    LINES.append(line)
    print(line)
    return ok
