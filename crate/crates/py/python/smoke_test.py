"""Smoke test for the crosspkg_py extension.

Build with `cargo build -p crosspkg-py --features extension-module --release`,
copy target/release/libcrosspkg_py.so next to this file as crosspkg_py.so
(or install with maturin), then run `python3 smoke_test.py`.
"""

import json
import math
import os
import sys
import tempfile

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import crosspkg_py as cp


def main():
    schema = cp.FeatureSchema()
    assert len(schema) == 132, len(schema)
    assert len(schema.hash()) == 64
    assert cp.FeatureSchema.from_json(schema.to_json()).hash() == schema.hash()

    assert cp.gl4_encode("aB3!") == "LUDS"
    assert cp.gl4_entropy("") == 0.0
    assert abs(cp.gl4_entropy("aB3!") - 2.0) < 1e-12

    tokens, lex_error = cp.lex(b"const x = require('child_process');", "js")
    assert not lex_error
    assert ("string", "child_process", 18) in tokens, tokens

    x, y = cp.synthetic_dataset("npm", 180, 20, seed=7)
    assert len(x) == 200 and sum(y) == 20
    assert all(len(row) == len(schema) for row in x)

    report = cp.cross_validate(x, y, learner="dt", k=5, repeats=2, seed=1)
    assert len(report["folds"]) == 10
    assert 0.0 <= report["precision"]["mean"] <= 1.0

    model = cp.Model.train(x, y, learner="gbt", seed=3)
    assert model.kind == "gbt" and not model.degenerate
    probs = model.predict_proba(x)
    assert all(0.0 <= p <= 1.0 and not math.isnan(p) for p in probs)
    accuracy = sum(p == t for p, t in zip(model.predict(x), y)) / len(y)
    assert accuracy >= 0.95, accuracy
    assert 1 <= len(model.top_features(5)) <= 5

    try:
        cp.Model.train(x, y, learner="dt", hyperparams=json.dumps({"max_depth": 0}))
    except ValueError:
        pass
    else:
        raise AssertionError("invalid max_depth accepted")

    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "m.json")
        model.save(path)
        again = cp.Model.load(path)
        assert again.predict_proba(x) == probs

        archive = cp.write_synthetic_package(tmp, "npm", malicious=True, seed=11)
        features = cp.extract(archive, "npm")
        assert len(features["values"]) == len(schema)
        verdict = cp.scan(archive, "npm", [("gbt", again)])
        assert verdict["disposition"] == "classified", verdict
        assert verdict["models"][0]["model_id"] == "gbt"
        assert verdict["models"][0]["probability"] == again.predict_proba([features["values"]])[0]

        bad = os.path.join(tmp, "broken-1.0.0.tgz")
        with open(bad, "wb") as f:
            f.write(b"not an archive")
        assert cp.scan(bad, "npm", [("gbt", again)])["disposition"] == "ingest_error"
        try:
            cp.extract(bad, "npm")
        except cp.CrosspkgError:
            pass
        else:
            raise AssertionError("corrupt archive extracted")

    print("smoke test ok")


if __name__ == "__main__":
    main()
