import numpy as np
import pytest

from timbrekit.audio import SynthSpec, synth

VOICE_FORMANTS = ((500.0, 80.0), (1500.0, 100.0), (2500.0, 150.0), (3500.0, 200.0))


@pytest.fixture
def pulse_train_100():
    return synth(SynthSpec(kind="pulse_train", f0=100.0, duration=1.0))


@pytest.fixture
def voiced_buffer():
    """A 4-resonance synthetic voice, the workhorse extraction input."""
    return synth(
        SynthSpec(
            kind="resonated_pulses", f0=120.0, duration=1.0, formants=VOICE_FORMANTS
        )
    )


def middle_slice(buf, n=640, start=2000):
    return np.asarray(buf.samples[start : start + n])
