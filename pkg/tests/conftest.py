from __future__ import annotations

from random import Random

import pytest

from v2xsec.clocks import VirtualClock
from v2xsec.hsm import Hsm
from v2xsec.identity import CertificateAuthority
from v2xsec.suites import FastHashSuite, P224Suite


@pytest.fixture
def fast_suite():
    return FastHashSuite()


@pytest.fixture
def p224_suite():
    return P224Suite()


@pytest.fixture
def clock():
    return VirtualClock(0)


@pytest.fixture
def hsm(clock, fast_suite):
    return Hsm(clock=clock, suite=fast_suite, rng=Random(7))


@pytest.fixture
def ca(fast_suite):
    return CertificateAuthority(1, suite=fast_suite, rng=Random(11))
