import hypothesis
import pytest

from mdighz.params import (ChannelModel, DetectorModel, SystemParams,
                           DecoyPlan, parse_config)

hypothesis.settings.register_profile("ci", max_examples=60, deadline=None,
                                      derandomize=True)
hypothesis.settings.load_profile("ci")

QCC_CONFIG = """
channel.beta = 0.2
detector.eta_d = {eta_d}
detector.p_d = 1e-7
system.e_d = {e_d}
system.f = 1.16
source.kind = wcs
source.mu = 0.4
decoy.mu1 = 0.005
sweep.L_min = {l_min}
sweep.L_max = {l_max}
sweep.L_step = {l_step}
"""


def qcc_config(eta_d=0.40, e_d=0.0, l_min=0, l_max=250, l_step=1):
    return parse_config(QCC_CONFIG.format(eta_d=eta_d, e_d=e_d, l_min=l_min,
                                          l_max=l_max, l_step=l_step))


@pytest.fixture
def paper_detector():
    return DetectorModel(eta_d=0.40, p_d=1e-7)


@pytest.fixture
def paper_system(paper_detector):
    return SystemParams(channel=ChannelModel(beta=0.2, length_km=50.0),
                        detector=paper_detector, e_d=0.0, f=1.16)


@pytest.fixture
def paper_decoy():
    return DecoyPlan(mu2=0.4, mu1=0.005)
