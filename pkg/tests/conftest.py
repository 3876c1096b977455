import numpy as np
import pytest

from tdmradar import (
    PointTarget,
    RadarParams,
    Scene,
    build_virtual_array,
    default_geometry,
)


@pytest.fixture(scope="session")
def geometry():
    return default_geometry()


@pytest.fixture(scope="session")
def varray(geometry):
    return build_virtual_array(geometry)


@pytest.fixture(scope="session")
def small_params():
    """Table-III-style waveform with shrunk chirp/sample counts for speed."""
    return RadarParams(
        carrier_frequency_hz=77e9,
        bandwidth_hz=250e6,
        chirp_duration_s=20e-6,
        adc_samples_per_chirp=128,
        chirps_per_tx_per_frame=32,
        n_tx=9,
        n_rx=16,
        pri_frame_a_s=21.0e-6,
        pri_frame_b_s=27.2e-6,
    )


def single_target_scene(range_m=20.0, velocity_mps=0.0, azimuth_deg=0.0,
                        amplitude=1.0, snr_db=None, seed=0):
    return Scene(
        targets=(PointTarget(range_m=range_m, velocity_mps=velocity_mps,
                             azimuth_deg=azimuth_deg, amplitude=amplitude),),
        snr_db=snr_db,
        rng_seed=seed,
    )


def peak_cell(power_map):
    d, r = np.unravel_index(np.argmax(power_map), power_map.shape)
    return int(r), int(d)
