"""Per-criterion summary lines for the acceptance suite."""

import re

CRITERIA = {
    1: "Euler [1/1] is x/(1+x) to 1e-12",
    2: "Euler [3/3] matches the closed-form coefficients to 1e-9",
    3: "Euler [5/5](1) near the quadrature value; error monotone in degree",
    4: "x/(1+x^2): [1/2] exact, radius 1 within 2%, imaginary-pair pattern",
    5: "Dauchot-Manneville graph coefficients w2, w3 match closed forms",
    6: "Dauchot-Manneville rational-manifold fixed points and stability",
    7: "Shaw-Pierre omega Taylor coefficients match printed values",
    8: "Shaw-Pierre diagonal rational of omega matches printed [4/4]",
    9: "Shaw-Pierre forced-response peak vs full-system shooting oracle",
    10: "invariance-residual slope >= order + 0.75 for every model",
    11: "rational re-expansion matches input through N+M (200 draws)",
    12: "rational field regression: recovery and denominator safeguards",
    13: "chaotic diagnostics: stable positive Lyapunov, broadband PSD",
    14: "60-state imported model: round trip and invariance slope",
}

_NODE_RE = re.compile(r"test_acceptance\.py::test_criterion_(\d+)")


def pytest_terminal_summary(terminalreporter):
    results = {}
    for status in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(status, []):
            m = _NODE_RE.search(getattr(rep, "nodeid", ""))
            if m:
                num = int(m.group(1))
                verdict = "PASS" if status == "passed" else "FAIL"
                # keep the worst verdict if something reports twice
                if results.get(num) != "FAIL":
                    results[num] = verdict
    if not results:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for num in sorted(CRITERIA):
        if num in results:
            line = "criterion %02d: %s - %s" % (num, results[num], CRITERIA[num])
            terminalreporter.write_line(line)
