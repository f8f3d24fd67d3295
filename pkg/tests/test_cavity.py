import math
import os
import tempfile
import unittest

import numpy as np

from cavion.cavity import (
    CavityParams,
    Scatterer,
    cavity_purcell,
    escape_efficiency,
    expected_purcell_report,
    intracavity_photon_number,
    local_coupling,
    microscopy_map,
    mode_geometry,
    purcell_from_lifetime,
    purcell_lifetime,
    resonant_transmission,
)
from cavion.errors import InstabilityError, InvalidParameterError


class TestCavityGeometry(unittest.TestCase):
    def setUp(self):
        self.cavity = CavityParams()
        self.geometry = mode_geometry(self.cavity)

    def test_waist_and_volume(self):
        """Default cavity has a ~3 um waist and ~41 um^3 mode volume."""
        self.assertAlmostEqual(self.geometry.waist_um, 3.0, delta=0.06)
        self.assertAlmostEqual(self.geometry.mode_volume_um3, 41.4, delta=41.4 * 0.05)

    def test_finesse_and_linewidth(self):
        self.assertAlmostEqual(self.geometry.finesse, 2 * math.pi / 143e-6, places=6)
        self.assertAlmostEqual(self.geometry.fwhm_hz / 569e6, 1.0, delta=0.01)
        self.assertAlmostEqual(self.geometry.fsr_hz, self.geometry.finesse * self.geometry.fwhm_hz)

    def test_scatterer_lowers_finesse(self):
        loaded = mode_geometry(self.cavity, extra_loss_ppm=171.0)
        self.assertAlmostEqual(loaded.finesse, 2 * math.pi / 314e-6, places=6)
        self.assertLess(loaded.q_factor, self.geometry.q_factor)

    def test_unstable_resonator(self):
        with self.assertRaises(InstabilityError):
            CavityParams(length_um=60.0, roc_um=60.0)
        with self.assertRaises(InstabilityError):
            CavityParams(length_um=70.0, roc_um=60.0)

    def test_negative_loss_rejected(self):
        with self.assertRaises(InvalidParameterError):
            CavityParams(loss_ppm=-1.0)
        with self.assertRaises(InvalidParameterError):
            mode_geometry(self.cavity, extra_loss_ppm=-5.0)

    def test_transmission_and_escape(self):
        self.assertAlmostEqual(resonant_transmission(100, 30, 13), 12000 / 143**2)
        self.assertAlmostEqual(escape_efficiency(100, 30, 184), 100 / 314)
        with self.assertRaises(InvalidParameterError):
            resonant_transmission(0, 0, 0)

    def test_transmission_over_a_loss_array(self):
        values = resonant_transmission(100, 30, np.array([13.0, 184.0]))
        np.testing.assert_allclose(values, [12000 / 143**2, 12000 / 314**2])
        with self.assertRaises(InvalidParameterError):
            resonant_transmission(0, 0, np.array([13.0, 0.0]))


class TestPurcell(unittest.TestCase):
    def test_lifetime_round_trip(self):
        """T = T_nat / (1 + C) and its inverse."""
        self.assertAlmostEqual(purcell_lifetime(11e-3, 123.0), 88.7e-6, delta=0.05e-6)
        self.assertAlmostEqual(purcell_from_lifetime(11e-3, 88e-6), 124.0, places=9)
        self.assertEqual(purcell_lifetime(11e-3, 0.0), 11e-3)

    def test_invalid_lifetimes(self):
        with self.assertRaises(InvalidParameterError):
            purcell_lifetime(0.0, 10.0)
        with self.assertRaises(InvalidParameterError):
            purcell_lifetime(11e-3, -1.0)
        with self.assertRaises(InvalidParameterError):
            purcell_from_lifetime(11e-3, 0.0)

    def test_expected_purcell_with_scatterer(self):
        """Formula value sits near 135, within the tolerance of the published bound."""
        report = expected_purcell_report(CavityParams())
        self.assertGreater(report.c_expected, 120.0)
        self.assertLess(report.c_expected, 150.0)
        self.assertTrue(report.consistent)
        self.assertAlmostEqual(report.ratio, 170.0 / report.c_expected)

    def test_purcell_scales_with_finesse(self):
        cavity = CavityParams()
        self.assertGreater(cavity_purcell(cavity), cavity_purcell(cavity, extra_loss_ppm=171.0))


class TestCoupling(unittest.TestCase):
    def setUp(self):
        self.cavity = CavityParams()
        self.waist = mode_geometry(self.cavity).waist_um

    def test_antinode_on_axis(self):
        xi = local_coupling([0.0, 0.0, 0.05], 0.0, self.cavity)
        self.assertAlmostEqual(xi, 1.0, places=12)

    def test_node(self):
        z_node = 0.05 + self.cavity.wavelength_um / 4
        xi = local_coupling([0.0, 0.0, z_node], 0.0, self.cavity)
        self.assertAlmostEqual(xi, 0.0, places=12)

    def test_lateral_and_orientation(self):
        xi = local_coupling([self.waist, 0.0, 0.05], 0.0, self.cavity)
        self.assertAlmostEqual(xi, math.exp(-2.0), places=9)
        xi = local_coupling([0.0, 0.0, 0.05], math.pi / 3, self.cavity)
        self.assertAlmostEqual(xi, 0.25, places=9)

    def test_vectorized(self):
        positions = np.array([[0.0, 0.0, 0.05], [1.0, 1.0, 0.2], [10.0, 0.0, 0.05]])
        xi = local_coupling(positions, np.zeros(3), self.cavity)
        self.assertEqual(xi.shape, (3,))
        self.assertTrue(np.all((xi >= 0) & (xi <= 1)))

    def test_photon_number_linear_in_power(self):
        n1 = intracavity_photon_number(10e-12, self.cavity, 171.0)
        n2 = intracavity_photon_number(20e-12, self.cavity, 171.0)
        self.assertGreater(n1, 0.0)
        self.assertAlmostEqual(n2 / n1, 2.0, places=12)
        self.assertEqual(intracavity_photon_number(0.0, self.cavity), 0.0)
        with self.assertRaises(InvalidParameterError):
            intracavity_photon_number(-1.0, self.cavity)


class TestMicroscopy(unittest.TestCase):
    def setUp(self):
        self.cavity = CavityParams()
        self.scatterers = [Scatterer(0.0, 0.0, 171.0)]

    def test_dip_at_particle(self):
        tmap = microscopy_map(self.scatterers, self.cavity, (-10, 10), (-10, 10), 1.0)
        self.assertEqual(tmap.values.shape, (21, 21))
        center = tmap.values[10, 10]
        self.assertAlmostEqual(center, 12000 / 314**2, places=9)
        self.assertAlmostEqual(tmap.values[0, 0], 12000 / 143**2, places=4)
        self.assertEqual(float(tmap.values.min()), center)

    def test_csv_rows(self):
        tmap = microscopy_map(self.scatterers, self.cavity, (0, 4), (0, 2), 1.0)
        with tempfile.TemporaryDirectory() as tmp:
            path = tmap.to_csv(os.path.join(tmp, "map.csv"))
            with open(path) as f:
                self.assertEqual(f.readline().strip(), "x_um,y_um,transmission")
            rows = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        self.assertEqual(rows.shape, (5 * 3, 3))
        self.assertEqual(tuple(rows[1][:2]), (1.0, 0.0))

    def test_bad_grid(self):
        with self.assertRaises(InvalidParameterError):
            microscopy_map(self.scatterers, self.cavity, (0, 1), (0, 1), 0.0)
        with self.assertRaises(InvalidParameterError):
            Scatterer(0.0, 0.0, -1.0)


if __name__ == "__main__":
    unittest.main()
