"""czlink: photon-mediated CZ gates over microwave interconnects.

Library layers:

* ``tensor_core``     -- tensor-product operator algebra (embed, partial trace)
* ``pulse_shaping``   -- quasimode waveforms and Raman drive envelopes
* ``ideal_protocol``  -- exact pure-state runs of both CZ protocols
* ``lindblad_engine`` -- cascaded-cavity master-equation simulation
* ``fidelity_metrics``-- post-selection, correction, Haar-average fidelity
* ``scaling_analysis``-- tau sweeps, optimal tau, power-law fits
* ``tls_backaction``  -- photon loss to a TLS bath: q, C, eta
* ``cli``             -- command-line front end (protocol-check, emit-check,
                         simulate, sweep, tls)
"""

__version__ = "0.1.0"

from .tensor_core import (
    SubsystemLayout, Operator, DensityMatrix, PureState,
    embed, partial_trace, expectation,
)
from .pulse_shaping import (
    Waveform, DriveEnvelope, TimeBinConfig,
    gaussian_waveform, emission_envelope, absorption_envelope,
    emit_oracle, waveform_overlap, mode_match_overlap,
)
from .ideal_protocol import (
    PhotonRegister, ProtocolTrace,
    fock_cz, timebin_cz, dispersive_step_gate,
    run_measurement_free, run_ancilla_assisted, heralded_loss_branch,
    post_loss_state, loss_dephasing_channel,
)
from .lindblad_engine import (
    GateConfig, GeneratorSchedule, CollapseSet, GateRun,
    build_hamiltonian, build_collapse_ops, integrate_segment,
    apply_pi_pulses, run_gate_evolution, evolve_channel_basis,
)
from .fidelity_metrics import (
    ConditionedOutcome, FidelityEstimate, PostSelectedChannel,
    condition_and_correct, assemble_channel, haar_average_fidelity,
    measurement_error_rescale, haar_states,
)
from .scaling_analysis import (
    SweepResult, PowerLawFit, ScalingReport,
    sweep_tau, find_tau_opt, fit_power_law, scaling_exponents,
)
from .tls_backaction import (
    SpectralDensity, LossReport,
    spectral_overlap_integrals, flat_band_coherence, gaussian_band_report,
    narrowband_expansion, steadystate_amplitudes, erasure_experiment_estimator,
)
