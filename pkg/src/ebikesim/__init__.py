"""Context-aware e-bike control stack, closed around a synthetic cyclist.

Route prediction from trip history, pollution-weighted energy budgeting,
powertrain power accounting, human-share tracking control, setpoint
generation, and a discrete-time simulation harness.
"""

__version__ = "0.1.0"
