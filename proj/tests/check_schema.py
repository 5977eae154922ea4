#!/usr/bin/env python3
#
# Copyright 2026 The cxlsim Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
# http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Checks configs/*.json against the run config schema and that the schema and
`cxlsim validate` agree on a set of malformed documents."""

import copy
import glob
import json
import os
import subprocess
import sys
import tempfile

import jsonschema


def mutations(base):
    def with_(fn):
        d = copy.deepcopy(base)
        fn(d)
        return d

    yield "unknown top-level key", with_(lambda d: d.update(bogus=1))
    yield "unknown cpu key", with_(lambda d: d["cpu"].update(threads=2))
    yield "cores out of range", with_(lambda d: d["cpu"].update(cores=9))
    yield "bad size suffix", with_(lambda d: d["caches"]["l1"].update(size="32kb"))
    yield "bad mode", with_(lambda d: d["topology"].update(mode="numa"))
    yield "bad ratio", with_(lambda d: d.update(interleave="1-1"))
    yield "wrong schema_version", with_(lambda d: d.update(schema_version=2))
    yield "latency as string", with_(lambda d: d["latency"].update(link_ns="10"))
    yield "unknown workload", with_(lambda d: d.update(workload={"type": "gups"}))


def main():
    root, cxlsim = sys.argv[1], sys.argv[2]
    with open(os.path.join(root, "schema", "run_config.schema.json")) as f:
        schema = json.load(f)
    jsonschema.Draft202012Validator.check_schema(schema)
    validator = jsonschema.Draft202012Validator(schema)
    failures = 0

    configs = sorted(glob.glob(os.path.join(root, "configs", "*.json")))
    if not configs:
        print("no configs found")
        return 1
    for path in configs:
        with open(path) as f:
            errs = [e.message for e in validator.iter_errors(json.load(f))]
        print(("ok   " if not errs else "FAIL ") + os.path.basename(path), *errs[:3])
        failures += bool(errs)

    with open(os.path.join(root, "configs", "example.json")) as f:
        base = json.load(f)
    with tempfile.TemporaryDirectory() as tmp:
        for label, doc in mutations(base):
            schema_rejects = not validator.is_valid(doc)
            path = os.path.join(tmp, "doc.json")
            with open(path, "w") as f:
                json.dump(doc, f)
            rc = subprocess.run([cxlsim, "validate", path], capture_output=True).returncode
            ok = schema_rejects and rc != 0
            print(("ok   " if ok else "FAIL ") + label, f"(schema rejects={schema_rejects}, cli rc={rc})")
            failures += not ok
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
