import numpy as np
from django.test import SimpleTestCase

from apps.simworld.actuators import PlantCommand
from apps.simworld.contact import (
    limit_switch,
    resolve_contacts,
    surface_gap,
    update_surface_tilt,
)
from apps.simworld.services import PlantModel, initial_state, step
from apps.simworld.state import PalletModel, SurfaceModel

DT = 0.02


def model_on(surface_tilt_deg, **pallet_kwargs):
    return PlantModel(
        pallet=PalletModel(**pallet_kwargs),
        surface=SurfaceModel(base_tilt=np.radians(surface_tilt_deg)),
    )


def lower(model, state, tilt=0.0, depth=0.2, until=None, max_steps=400):
    """Command the fork ``depth`` below its current height and follow it down"""
    target = state.fork.height - depth
    history = [state]
    for _ in range(max_steps):
        state = step(state, PlantCommand(tilt_ref=tilt, height_ref=target), DT, model)
        history.append(state)
        if until is not None and until(state):
            break
    return state, history


def com_height(model, state):
    return state.pallet.to_world(*model.pallet.center_of_mass())[1]


class SurfaceTiltTestCase(SimpleTestCase):
    """Tests for update_surface_tilt"""

    def setUp(self):
        self.surface = SurfaceModel(
            tilt_vs_load=((0.0, 0.0), (1500.0, np.radians(3.0)), (2000.0, np.radians(4.0)))
        )

    def test_three_loads_tilt_three_degrees(self):
        self.assertEqual(update_surface_tilt(self.surface, 1500.0), np.radians(3.0))

    def test_four_loads_tilt_four_degrees(self):
        self.assertEqual(update_surface_tilt(self.surface, 2000.0), np.radians(4.0))

    def test_no_load_is_base_tilt(self):
        surface = SurfaceModel(base_tilt=np.radians(-2.0), tilt_vs_load=self.surface.tilt_vs_load)
        self.assertAlmostEqual(update_surface_tilt(surface, 0.0), np.radians(-2.0), places=15)

    def test_interpolates_between_breakpoints(self):
        self.assertAlmostEqual(update_surface_tilt(self.surface, 1750.0), np.radians(3.5), places=12)

    def test_rigid_surface(self):
        self.assertEqual(update_surface_tilt(SurfaceModel(base_tilt=0.01), 900.0), 0.01)


class ResolveContactsTestCase(SimpleTestCase):
    """Tests for resolve_contacts and limit_switch"""

    def test_airborne_pallet_follows_fork(self):
        model = model_on(0.0)
        state = initial_state(model)
        self.assertEqual(state.forces.label, "fork")
        self.assertAlmostEqual(state.pallet.pitch, 0.0, places=12)
        self.assertTrue(state.fork.limit_switch)
        self.assertTrue(limit_switch(state))

        tilted = resolve_contacts(state.with_fork(tilt=0.02), model.pallet, model.surface)
        self.assertAlmostEqual(tilted.pallet.pitch, 0.02, places=12)
        self.assertTrue(tilted.fork.limit_switch)

    def test_up_slope_wedges_within_clearance(self):
        """Level fork onto a 4 deg rise: the pallet pitches until the clearance runs out"""
        model = model_on(4.0)
        state, _ = lower(model, initial_state(model))
        pallet = model.pallet

        bound = np.arcsin(2 * pallet.hole_clearance / 1.0)
        self.assertLess(state.pallet.pitch, 0.0)
        self.assertLessEqual(abs(state.pallet.pitch - state.fork.tilt), bound + 1e-6)
        self.assertGreater(state.forces.heel, 0.0)
        self.assertTrue(state.fork.limit_switch)
        self.assertGreater(state.fork.height, state.height_joint.position - 1e-9)
        self.assertFalse(state.jam)

    def test_up_slope_flush_when_clearance_permits(self):
        """A loose hole lets the pallet lie flush at -4 deg under a level fork"""
        model = model_on(4.0, hole_clearance=0.05, slot_floor=0.02)
        state, _ = lower(model, initial_state(model), depth=0.3)
        self.assertAlmostEqual(state.pallet.pitch, np.radians(-4.0), places=9)

    def test_matched_tilt_releases_switch(self):
        """Fork tilted to the surface and lowered: heel force vanishes"""
        model = model_on(4.0)
        state = initial_state(model)
        state, _ = lower(model, state, tilt=np.radians(-4.0), depth=0.25)

        self.assertEqual(state.forces.label, "surface")
        self.assertAlmostEqual(state.pallet.pitch, np.radians(-4.0), places=9)
        self.assertEqual(state.forces.fork, 0.0)
        self.assertFalse(state.fork.limit_switch)

    def test_down_slope_tip_loaded_switch_off(self):
        """Rear corner grounds first: the tip still carries load but the heel switch opens"""
        model = model_on(-2.0)
        state = initial_state(model)
        state, _ = lower(model, state, until=lambda s: s.forces.label != "fork")

        self.assertEqual(state.forces.label, "rear_corner+tip")
        self.assertGreater(state.forces.tip, 0.0)
        self.assertEqual(state.forces.heel, 0.0)
        self.assertFalse(state.fork.limit_switch)

    def test_descent_invariants(self):
        """No penetration, clearance bound and non-rising pallet on every step"""
        for tilt_deg in (4.0, -2.0, 0.0):
            model = model_on(tilt_deg)
            pallet = model.pallet
            _, history = lower(model, initial_state(model), depth=0.3)
            bound = np.arcsin(2 * pallet.hole_clearance / 1.0)
            heights = [com_height(model, s) for s in history]

            for state in history:
                for xi in (0.0, pallet.deck_length):
                    corner = state.pallet.to_world(xi, 0.0)
                    self.assertGreaterEqual(surface_gap(model.surface, state.surface_tilt, corner), -1e-6)
                self.assertLessEqual(abs(state.pallet.pitch - state.fork.tilt), bound + 1e-6)
            self.assertTrue(np.all(np.diff(heights) <= 1e-9))

    def test_gravity_limited_descent(self):
        """The fork rests on a grounded pallet instead of pushing it down"""
        model = model_on(0.0)
        state, history = lower(model, initial_state(model), depth=0.5)
        resting = history[-1]
        self.assertGreater(resting.fork.height, history[0].fork.height - 0.5 + 0.1)
        self.assertEqual(resting.forces.label, "surface")
        self.assertGreaterEqual(resting.height_joint.position, resting.fork.height - 1e-12)

    def test_switch_is_pure_function_of_forces(self):
        model = model_on(-2.0)
        _, history = lower(model, initial_state(model), depth=0.15)
        for state in history:
            self.assertEqual(state.fork.limit_switch, limit_switch(state))

    def test_variable_surface_tilts_under_load(self):
        """Weight handed to the surface raises its tilt from 3 towards 4 deg"""
        surface = SurfaceModel(
            tilt_vs_load=((0.0, 0.0), (1500.0, np.radians(3.0)), (2000.0, np.radians(4.0))),
            preload=1500.0,
        )
        model = PlantModel(surface=surface)
        state = initial_state(model)
        self.assertAlmostEqual(np.degrees(state.surface_tilt), 3.0, places=9)
        state, _ = lower(model, state, tilt=np.radians(-4.0), depth=0.3)
        self.assertAlmostEqual(np.degrees(state.surface_tilt), 4.0, places=6)


def reverse(model, state, tilt, press=0.002, until_x=-1.2, max_steps=400):
    """Back the chassis out while the height loop keeps pressing the blade down"""
    history = [state]
    for _ in range(max_steps):
        target = state.height_joint.position - press
        state = step(state, PlantCommand(tilt_ref=tilt, height_ref=target, drive=-0.5), DT, model)
        history.append(state)
        if state.chassis_x <= until_x:
            break
    return state, history


class BladeExitTestCase(SimpleTestCase):
    """Backing out of a grounded pallet with the blade riding the hole floor"""

    def test_blade_leaves_pallet_without_jam(self):
        for surface_deg, tilt_deg in ((-2.0, 2.0), (0.0, -0.5), (4.0, -4.0)):
            with self.subTest(surface=surface_deg, tilt=tilt_deg):
                model = model_on(surface_deg)
                tilt = np.radians(tilt_deg)
                grounded, _ = lower(model, initial_state(model), tilt=tilt, depth=0.3)
                self.assertEqual(grounded.forces.label, "surface")

                final, history = reverse(model, grounded, tilt)

                self.assertFalse(any(s.jam for s in history))
                self.assertLessEqual(final.chassis_x, -1.2)
                self.assertEqual(final.forces.label, "surface")
                self.assertEqual(final.forces.fork, 0.0)
                self.assertFalse(final.fork.limit_switch)
                self.assertAlmostEqual(final.pallet.x, grounded.pallet.x, places=12)
                self.assertAlmostEqual(final.pallet.pitch, -final.surface_tilt, places=9)

    def test_lift_stops_at_floor_with_tip_behind_centre_of_mass(self):
        """Tip short of the load centre and pressed under the floor: the fork rests on the floor"""
        model = model_on(-2.0)
        tilt = np.radians(2.0)
        grounded, _ = lower(model, initial_state(model), tilt=tilt, depth=0.3)
        # heel at chassis_x + 0.40, so the tip sits 0.1 m behind the deck centre
        backed, _ = reverse(model, grounded, tilt, until_x=-0.6)
        pallet = model.pallet

        pressed = backed.with_fork(height=backed.fork.height - 0.001)
        resolved = resolve_contacts(pressed, model.pallet, model.surface)

        self.assertFalse(resolved.jam)
        self.assertEqual(resolved.forces.label, "surface")
        self.assertGreater(resolved.fork.height, pressed.fork.height)
        self.assertLess(resolved.fork.height, backed.fork.height + 1e-6)
        tip = resolved.heel_position(model.geometry) + np.array([np.cos(tilt), -np.sin(tilt)])
        _, eta = resolved.pallet.to_local(tip)
        self.assertAlmostEqual(eta, pallet.slot_floor, delta=1e-6)
