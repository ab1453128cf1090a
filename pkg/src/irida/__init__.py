"""Irida: real-time WSN visualization feedback pipeline.

Subpackages map onto the pipeline stages: protocol (wire format),
netstate (visualization model), icu (control-unit relay), sim (simulated
node network), headless (renderer-free visualizer with record/replay),
cli (the `irida` entry point).
"""

__version__ = "0.1.0"
