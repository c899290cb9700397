"""Floating offshore wind turbine control toolkit.

Modules, from the rotor up: :mod:`rotor_aero` (Cp/Ct surfaces and loads),
:mod:`fowt_model` (nonlinear plant), :mod:`linearization` (trim, 4-state model,
zeros), :mod:`tuning` (PI, detuning, compensation, platform loops),
:mod:`controller` (runtime controller), :mod:`wind` (inputs),
:mod:`simulation` (RK4 engine, metrics) and :mod:`study` / :mod:`cli`
(batch studies).
"""

__version__ = "0.1.0"
