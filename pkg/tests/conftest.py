import pytest

from andlab.discretize import GridSpec, assemble_hamiltonian, empty_configuration
from andlab.model import BoxSpec, SiteProfile, sample_configuration


@pytest.fixture
def profile():
    return SiteProfile()


def make_box(d, L, center=None):
    return BoxSpec(d, tuple([0.0] * d) if center is None else center, float(L))


def assemble(box, n=4, boundary="dirichlet", config=None, profile=None,
             v_per=None, u_background=None):
    if profile is None:
        profile = SiteProfile()
    if config is None:
        config = empty_configuration(box)
    return assemble_hamiltonian(box, GridSpec(n, boundary), profile, config,
                                v_per, u_background)


def random_hamiltonian(d, L, n, dist, seed, trial=0, profile=None):
    box = make_box(d, L)
    cfg = sample_configuration(dist, box, None, seed, trial)
    return assemble(box, n=n, config=cfg, profile=profile), cfg
