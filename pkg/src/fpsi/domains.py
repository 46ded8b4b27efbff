"""Shared discretization of one scenario: meshes, spaces, constant matrices.

Everything assembled here is independent of the time level, so the operator
classes factorize once and reuse the pieces for every step.  The interface
trace matrices map nodal interface data (stored on the P2 trace nodes in
arclength order) to load vectors of the volume spaces.
"""

from __future__ import annotations

import numpy as np

from . import fem
from .fem import EdgeBlock, FeSpace
from .mesh import build_rect_mesh, pair_interface
from .physics import Scenario


class Domains:
    """Meshes, function spaces, and constant matrices of both subdomains."""

    def __init__(self, scenario: Scenario):
        self.scenario = scenario
        self.mesh_f = build_rect_mesh(scenario.fluid_rect, scenario.h, scenario.fluid_tags)
        self.mesh_p = build_rect_mesh(scenario.poro_rect, scenario.h, scenario.poro_tags)
        self.pairing = pair_interface(self.mesh_f, self.mesh_p)

        bc = scenario.field_bc
        self.Vf = FeSpace(self.mesh_f, "p2_vector",
                          dirichlet_tags=bc("v_f").dirichlet_tags,
                          component_tags=bc("v_f").component_tags)
        self.Qf = FeSpace(self.mesh_f, "p1_scalar")
        self.Sf = FeSpace(self.mesh_f, "p2_scalar")

        self.Vu = FeSpace(self.mesh_p, "p2_vector",
                          dirichlet_tags=bc("u_p").dirichlet_tags,
                          component_tags=bc("u_p").component_tags)
        self.Vv = FeSpace(self.mesh_p, "p2_vector",
                          dirichlet_tags=bc("v_p").dirichlet_tags,
                          component_tags=bc("v_p").component_tags)
        self.Bp = FeSpace(self.mesh_p, "p1_scalar")
        self.Wp = FeSpace(self.mesh_p, "p2_scalar",
                          dirichlet_tags=bc("p_p").dirichlet_tags)

        params = scenario.params
        self.c_bjs = params.c_bjs(self.pairing.tau)
        self.kappa_over_mu = params.kappa_tensor() / params.mu_f

        # fluid-side volume matrices
        self.Mv_f = fem.mass_matrix(self.Vf, self.Vf)
        self.Aeps_f = fem.eps_stiffness(self.Vf)
        self.D_f = fem.divergence_matrix(self.Vf, self.Qf)

        # poroelastic volume matrices (Vu and Vv share the dof layout)
        self.Mv_p = fem.mass_matrix(self.Vu, self.Vu)
        self.Aeps_p = fem.eps_stiffness(self.Vu)
        self.D_beta = fem.divergence_matrix(self.Vu, self.Bp)
        self.D_w = fem.divergence_matrix(self.Vu, self.Wp)
        self.M_B = fem.mass_matrix(self.Bp, self.Bp)
        self.M_W = fem.mass_matrix(self.Wp, self.Wp)
        self.M_WB = fem.mass_matrix(self.Bp, self.Wp)   # rows W, cols B
        self.M_BW = fem.mass_matrix(self.Wp, self.Bp)   # rows B, cols W
        self.A_K = fem.grad_stiffness(self.Wp, self.Wp, coefficient=self.kappa_over_mu)
        self.Ddiv_p = fem.divdiv_matrix(self.Vu)

        # interface blocks and trace matrices
        pr = self.pairing
        fblock = EdgeBlock.from_side(pr.fluid)
        pblock = EdgeBlock.from_side(pr.poro)
        n_f, n_p, tau_f, tau_p = pr.n_f, pr.n_p, pr.tau, pr.tau_p

        self.Bnn_f = fem.edge_product_matrix(
            self.Vf, ("normal", n_f), self.Vf, ("normal", n_f), fblock)
        self.Btt_f = fem.edge_product_matrix(
            self.Vf, ("tangent", tau_f), self.Vf, ("tangent", tau_f), fblock)
        self.Bnn_p = fem.edge_product_matrix(
            self.Vu, ("normal", n_p), self.Vu, ("normal", n_p), pblock)
        self.Btt_p = fem.edge_product_matrix(
            self.Vu, ("tangent", tau_p), self.Vu, ("tangent", tau_p), pblock)
        self.Bss_p = fem.edge_product_matrix(
            self.Wp, "scalar", self.Wp, "scalar", pblock)
        self.Bss_f = fem.edge_product_matrix(
            self.Sf, "scalar", self.Sf, "scalar", fblock)

        self.nodes_f = pr.fluid.p2_nodes
        self.nodes_p = pr.poro.p2_nodes
        self.node_coords = pr.fluid.node_coords

        # nodal-trace consumption matrices: rows in a volume space, columns on
        # the interface nodes of the same side
        self.Tn_f = fem.edge_product_matrix(
            self.Vf, ("normal", n_f), self.Sf, "scalar", fblock)[:, self.nodes_f]
        self.Tt_f = fem.edge_product_matrix(
            self.Vf, ("tangent", tau_f), self.Sf, "scalar", fblock)[:, self.nodes_f]
        self.Tn_p = fem.edge_product_matrix(
            self.Vu, ("normal", n_p), self.Wp, "scalar", pblock)[:, self.nodes_p]
        self.Tt_p = fem.edge_product_matrix(
            self.Vu, ("tangent", tau_p), self.Wp, "scalar", pblock)[:, self.nodes_p]
        self.Ts_p = self.Bss_p[:, self.nodes_p]
        # interface L2 form of nodal data, for trace norms
        self.M_iface = self.Bss_p[self.nodes_p][:, self.nodes_p]

        # cross-domain couplings for the strongly coupled operator
        self.N_fp = fem.edge_product_matrix(
            self.Vf, ("normal", n_f), self.Wp, "scalar", fblock, pblock)
        self.N_pf = fem.edge_product_matrix(
            self.Wp, "scalar", self.Vf, ("normal", n_f), pblock, fblock)
        self.N_pp = fem.edge_product_matrix(
            self.Wp, "scalar", self.Vu, ("normal", n_p), pblock, pblock)
        self.X_fp = fem.edge_product_matrix(
            self.Vf, ("tangent", tau_f), self.Vu, ("tangent", tau_p), fblock, pblock)
        self.X_pf = fem.edge_product_matrix(
            self.Vu, ("tangent", tau_p), self.Vf, ("tangent", tau_f), pblock, fblock)

        # traction edge blocks keyed by tag
        self.fluid_traction_blocks = {
            tag: EdgeBlock.from_tags(self.mesh_f, tag)
            for tag in scenario.fluid_traction
        }
        self.poro_traction_blocks = {
            tag: EdgeBlock.from_tags(self.mesh_p, tag)
            for tag in scenario.poro_traction
        }

    # -- nodal interface traces --------------------------------------------
    def trace_normal_f(self, v_f: np.ndarray) -> np.ndarray:
        n = self.pairing.n_f
        return v_f[2 * self.nodes_f] * n[0] + v_f[2 * self.nodes_f + 1] * n[1]

    def trace_tangent_f(self, v_f: np.ndarray) -> np.ndarray:
        t = self.pairing.tau
        return v_f[2 * self.nodes_f] * t[0] + v_f[2 * self.nodes_f + 1] * t[1]

    def trace_normal_p(self, u_p: np.ndarray) -> np.ndarray:
        n = self.pairing.n_p
        return u_p[2 * self.nodes_p] * n[0] + u_p[2 * self.nodes_p + 1] * n[1]

    def trace_tangent_p(self, u_p: np.ndarray) -> np.ndarray:
        t = self.pairing.tau_p
        return u_p[2 * self.nodes_p] * t[0] + u_p[2 * self.nodes_p + 1] * t[1]

    def trace_scalar_p(self, p_p: np.ndarray) -> np.ndarray:
        return p_p[self.nodes_p]

    def flux_mismatch(self, t: float) -> np.ndarray:
        fn = self.scenario.interface_flux_mismatch
        if fn is None:
            return np.zeros(len(self.nodes_p))
        return np.asarray(fn(t, self.node_coords), dtype=float)

    def trace_norm(self, values: np.ndarray) -> float:
        """Interface L2 norm of nodal data."""
        return float(np.sqrt(max(values @ (self.M_iface @ values), 0.0)))

    # -- per-step loads ------------------------------------------------------
    def fluid_volume_load(self, t: float) -> np.ndarray:
        forcing = self.scenario.forcing
        if forcing is None:
            return np.zeros(self.Vf.dof_count)
        return fem.load_vector(self.Vf, forcing.f_f, t)

    def fluid_mass_load(self, t: float) -> np.ndarray:
        forcing = self.scenario.forcing
        if forcing is None:
            return np.zeros(self.Qf.dof_count)
        return fem.load_vector(self.Qf, forcing.phi_f, t)

    def poro_volume_load(self, t: float) -> np.ndarray:
        forcing = self.scenario.forcing
        if forcing is None:
            return np.zeros(self.Vu.dof_count)
        return fem.load_vector(self.Vu, forcing.f_p, t)

    def poro_mass_load(self, t: float) -> np.ndarray:
        forcing = self.scenario.forcing
        out = np.zeros(self.Wp.dof_count)
        if forcing is not None:
            out += fem.load_vector(self.Wp, forcing.phi_p, t)
        g = np.asarray(self.scenario.params.gravity, dtype=float)
        if np.any(g != 0.0):
            out += self.scenario.params.rho_f * fem.gravity_load(
                self.Wp, self.kappa_over_mu, g)
        return out

    def fluid_traction_load(self, t: float) -> np.ndarray:
        out = np.zeros(self.Vf.dof_count)
        for tag, fn in self.scenario.fluid_traction.items():
            block = self.fluid_traction_blocks[tag]
            if block.n_edges:
                out += fem.edge_load_vector(self.Vf, "vector", block, fn, t)
        return out

    def poro_traction_load(self, t: float) -> np.ndarray:
        out = np.zeros(self.Vu.dof_count)
        for tag, fn in self.scenario.poro_traction.items():
            block = self.poro_traction_blocks[tag]
            if block.n_edges:
                out += fem.edge_load_vector(self.Vu, "vector", block, fn, t)
        return out
