"""Named experiment configurations."""

from __future__ import annotations

import copy

from .config import ExperimentConfig

_MHZ = 1e6

_CABLED_FIG = dict(
    link_profile="cabled", topology="4conn-ring", snr_db=36.0, snr_spread_db=0.0, iterations=60
)
_SWEEP = dict(link_profile="wireless", topology="4conn-ring", drift_diffusion=0.0)

PRESETS: dict[str, ExperimentConfig] = {
    "cabled-36db": ExperimentConfig(
        name="cabled-36db",
        description="Cabled ring, uniform 36 dB, 40 MHz, 60 iterations (offsets, dBps, precision)",
        **_CABLED_FIG,
    ),
    "cabled-ring": ExperimentConfig(
        name="cabled-ring",
        link_profile="cabled",
        description="Cabled ring at the default 33 +- 3 dB link SNR, 100 iterations",
    ),
    "wireless-ring": ExperimentConfig(
        name="wireless-ring",
        link_profile="wireless",
        description="Wireless ring at 32 +- 4 dB link SNR, 10 trials x 100 iterations",
    ),
    "wireless-short": ExperimentConfig(
        name="wireless-short",
        link_profile="wireless",
        iterations=60,
        description="Wireless ring, 60 iterations",
    ),
    "drift-free-run": ExperimentConfig(
        name="drift-free-run",
        sync_stop_iteration=30,
        iterations=330,
        description="Synchronise for 30 epochs, then free-run for 60 s of drift",
    ),
    "drift-synced": ExperimentConfig(
        name="drift-synced",
        iterations=330,
        description="Same horizon as drift-free-run with continuous synchronisation",
    ),
    "bw-sweep": ExperimentConfig(
        name="bw-sweep",
        snr_db=36.0,
        snr_spread_db=0.0,
        sweep_axis="tone_separation",
        sweep_values=[10 * _MHZ, 20 * _MHZ, 30 * _MHZ, 40 * _MHZ, 50 * _MHZ],
        description="Tone separation 10-50 MHz at a uniform 36 dB; std and CRLB columns",
        **_SWEEP,
    ),
    "snr-sweep": ExperimentConfig(
        name="snr-sweep",
        sweep_axis="snr_db",
        sweep_values=[14.0, 18.0, 22.0, 26.0, 30.0, 36.0],
        description="Average link SNR 14-36 dB at 40 MHz; std and link-averaged bound columns",
        **_SWEEP,
    ),
}

for _name, _topo in [("3conn", "3conn"), ("4conn-ring", "4conn-ring"), ("5conn", "5conn"), ("full", "full")]:
    PRESETS[f"topo-{_name}"] = ExperimentConfig(
        name=f"topo-{_name}",
        topology=_topo,
        link_profile="wireless",
        description=f"Wireless array on the {_name} topology, 10 trials x 100 iterations",
    )

TOPOLOGY_PRESETS = ("topo-3conn", "topo-4conn-ring", "topo-5conn", "topo-full")


def get_preset(name: str) -> ExperimentConfig:
    try:
        return copy.deepcopy(PRESETS[name])
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; run 'picosync list-presets'") from None


def list_presets() -> list[tuple[str, str]]:
    return [(name, cfg.description) for name, cfg in PRESETS.items()]
