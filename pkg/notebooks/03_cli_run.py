#!/usr/bin/env python
# Drive the command-line front end from Python: write a config, run the pesin
# task, rerun it and compare manifest digests, then export plot data.
import json
import tempfile
from pathlib import Path

from pesinlab.cli import main

work = Path(tempfile.mkdtemp())
cfg = {"system": {"name": "cat_map"}, "task": "bowen", "n_range": [2, 6], "seed": 7}
(work / "bowen.json").write_text(json.dumps(cfg))

for run in ("a", "b"):
    main(["bowen", "--config", str(work / "bowen.json"), "--out", str(work / run)])

digests = [json.loads((work / r / "manifest.json").read_text())["files"] for r in ("a", "b")]
print("identical digests:", digests[0] == digests[1])

main(["export", str(work / "a")])
print((work / "a" / "plot_bowen.csv").read_text())
