#!/usr/bin/env python3
"""Run the golden protocol cases against a live backend.

    python3 tools/conformance.py http://127.0.0.1:8750 [data/conformance/golden.json]

Prints one line per case and exits non-zero if any case fails. The C++
test suite runs the same file against the stub backend.
"""

import json
import math
import sys
import urllib.error
import urllib.request

CODES = {"negation", "lexical", "resemantic", "quantifier", "insert", "restructure", "shuffle", "delete"}


def call(base, method, path, data):
    req = urllib.request.Request(base.rstrip("/") + path, data=data, method=method,
                                 headers={"Content-Type": "application/json"})
    try:
        with urllib.request.urlopen(req, timeout=60) as resp:
            return resp.status, resp.read().decode("utf-8")
    except urllib.error.HTTPError as e:
        return e.code, e.read().decode("utf-8")


def check(schema, body, resp):
    if schema == "info":
        caps = resp["capabilities"]
        assert isinstance(resp["backend_id"], str) and resp["backend_id"]
        assert all(isinstance(caps[k], bool) for k in ("generate", "mask_fill", "perturb"))
        assert isinstance(resp["model_fingerprint"], str)
    elif schema == "generate":
        comps = resp["completions"]
        assert isinstance(comps, list) and all(isinstance(c, str) for c in comps)
        assert len(comps) <= body["n"]
    elif schema == "mask_fill":
        for cand in body["candidates"]:
            score = resp["scores"][cand]
            assert isinstance(score, (int, float)) and math.isfinite(score) and score >= 0
            assert isinstance(resp["covered"][cand], bool)
    elif schema == "perturb":
        for p in resp["perturbations"]:
            assert isinstance(p["text"], str)
            assert p["code"] in CODES and p["code"] in body["control_codes"]


def main():
    if len(sys.argv) < 2:
        sys.exit(__doc__)
    base = sys.argv[1]
    path = sys.argv[2] if len(sys.argv) > 2 else "data/conformance/golden.json"
    cases = json.load(open(path, encoding="utf-8"))["cases"]
    failed = 0
    for case in cases:
        data = None
        if "raw_body" in case:
            data = case["raw_body"].encode("utf-8")
        elif "body" in case:
            data = json.dumps(case["body"]).encode("utf-8")
        try:
            status, text = call(base, case["method"], case["path"], data)
            assert status == case["status"], f"status {status}, want {case['status']}"
            if "schema" in case:
                check(case["schema"], case.get("body"), json.loads(text))
            print(f"PASS {case['name']}")
        except (AssertionError, KeyError, TypeError, ValueError, OSError) as e:
            failed += 1
            print(f"FAIL {case['name']}: {e!r}")
    sys.exit(1 if failed else 0)


if __name__ == "__main__":
    main()
