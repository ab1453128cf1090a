#!/usr/bin/env python3
"""Produce the state-mirror test fixture from the reference pipeline.

Runs a scripted 4x4 simulation, keeps the first 200 emitted lines, folds
them through the headless state rules, and stores both the timed lines and
the resulting snapshot. The browser IVU's fold must reproduce the snapshot
(timestamp-insensitively) from the same lines.
"""

import json
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[2] / "src"))

from irida import netstate, sim  # noqa: E402

OUT = Path(__file__).resolve().parents[1] / "tests" / "fixtures" / "mirror.json"


def main() -> None:
    config = sim.SimConfig(grid_width=4, grid_height=4, seed=31337, heartbeat_period=1.0)
    result = sim.run_scripted(config, [(2.0, "0x00", 5.0)], 10.0)
    lines = result.lines[:200]
    assert len(lines) == 200, f"scenario too short: {len(lines)}"

    state = netstate.NetworkState()
    for t, line in lines:
        from irida.protocol import parse_line

        state.apply(parse_line(line), t)
    snapshot_at = lines[-1][0]
    doc = state.snapshot(snapshot_at)
    assert doc["animations"], "fixture should exercise live animations"
    assert doc["warnings"] == {}, doc["warnings"]

    OUT.parent.mkdir(parents=True, exist_ok=True)
    # times kept as exact float seconds so IEEE doubles agree across languages
    OUT.write_text(
        json.dumps(
            {
                "lines": [[t, line] for t, line in lines],
                "snapshot_at": snapshot_at,
                "snapshot": doc,
            },
            sort_keys=True,
            indent=1,
        )
        + "\n",
        encoding="utf-8",
    )
    print(f"wrote {OUT} ({len(lines)} lines, {len(doc['nodes'])} nodes)")


if __name__ == "__main__":
    main()
