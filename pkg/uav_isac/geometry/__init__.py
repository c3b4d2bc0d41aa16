from .aod import Aod, aod, wavevector, spherical_to_euclid, euclid_to_spherical
from .arrays import array_response, upa_layout
from .scenario import Scenario, LIGHTSPEED

__all__ = ('Aod', 'aod', 'wavevector', 'array_response', 'upa_layout', 'Scenario', 'LIGHTSPEED',
           'spherical_to_euclid', 'euclid_to_spherical')
