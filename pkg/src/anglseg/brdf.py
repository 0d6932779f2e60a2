"""Parametric reflectance models on the upper hemisphere.

Directions are (theta, phi) pairs with theta the polar angle measured from
the surface normal and phi the azimuth.  All models are reciprocal in the
light and view arguments and return nonnegative values.
"""

import math
from dataclasses import dataclass, field

import numpy as np

LAMBERTIAN = "lambertian"
PHONG_SPECULAR = "phong-specular"
TWO_LOBE = "two-lobe"
KINDS = (LAMBERTIAN, PHONG_SPECULAR, TWO_LOBE)

# Peak pixel value allowed for a material lit head-on at nominal intensity pi.
WHITE_POINT = 1.2


@dataclass(frozen=True)
class Direction:
    """Hemisphere direction; phi is wrapped into [0, 2*pi)."""
    theta: float
    phi: float

    def __post_init__(self):
        if not 0.0 <= self.theta <= math.pi / 2 + 1e-9:
            raise ValueError(f"polar angle {self.theta} outside [0, pi/2]")
        object.__setattr__(self, "phi", self.phi % (2.0 * math.pi))

    def unit(self):
        st = math.sin(self.theta)
        return np.array([st * math.cos(self.phi), st * math.sin(self.phi),
                         math.cos(self.theta)])


@dataclass(frozen=True)
class BrdfModel:
    """One material's reflectance: a diffuse term, a glossy lobe, or both.

    The glossy lobe is specular_strength * (n+2)/(2*pi) * max(0, r.v)^n with
    r the mirror of the light direction, so its hemispherical energy is
    close to specular_strength.  Construction rejects parameter choices
    whose head-on white point would exceed 1.2 at nominal light intensity.
    """
    class_id: int
    kind: str
    albedo: float = 0.0
    specular_strength: float = 0.0
    shininess: float = 1.0
    name: str = ""

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown BRDF kind {self.kind!r}")
        if not 0.0 <= self.albedo <= 1.0:
            raise ValueError(f"albedo {self.albedo} outside [0, 1]")
        if self.specular_strength < 0.0:
            raise ValueError(f"specular strength {self.specular_strength} < 0")
        if self.shininess < 1.0:
            raise ValueError(f"shininess {self.shininess} < 1")
        peak = self.albedo + self.specular_strength * (self.shininess + 2.0) / 2.0
        if peak > WHITE_POINT + 1e-9:
            raise ValueError(
                f"material {self.name or self.class_id}: head-on white point "
                f"{peak:.3f} exceeds {WHITE_POINT}; lower specular_strength")


def _lobe_values(model, l_theta, l_phi, v_theta, v_phi):
    """Vectorized reflectance for broadcastable angle arrays."""
    out = np.zeros(np.broadcast(l_theta, l_phi, v_theta, v_phi).shape)
    if model.kind in (LAMBERTIAN, TWO_LOBE):
        out = out + model.albedo / math.pi
    if model.kind in (PHONG_SPECULAR, TWO_LOBE) and model.specular_strength > 0.0:
        # r = mirror of l about the normal; r.v in spherical terms.
        cos_rv = (np.cos(l_theta) * np.cos(v_theta)
                  - np.sin(l_theta) * np.sin(v_theta) * np.cos(l_phi - v_phi))
        n = model.shininess
        norm = (n + 2.0) / (2.0 * math.pi)
        out = out + model.specular_strength * norm * np.maximum(0.0, cos_rv) ** n
    return out


def eval_brdf(model, light, view):
    """Reflectance toward `view` for light arriving from `light`."""
    return float(_lobe_values(model, light.theta, light.phi, view.theta, view.phi))


def integrate_radiance(model, illumination, view, n_theta=64, n_phi=128):
    """Reflected radiance toward `view` under a hemispherical illumination field.

    Midpoint rule on an n_theta x n_phi grid over theta in [0, pi/2] and phi
    in [0, 2*pi); `illumination(theta, phi)` must accept arrays.  The grid
    must be at least 16 x 32.
    """
    if n_theta < 16 or n_phi < 32:
        raise ValueError(f"quadrature grid {n_theta}x{n_phi} below minimum 16x32")
    d_theta = (math.pi / 2) / n_theta
    d_phi = (2.0 * math.pi) / n_phi
    theta = (np.arange(n_theta) + 0.5) * d_theta
    phi = (np.arange(n_phi) + 0.5) * d_phi
    tg, pg = np.meshgrid(theta, phi, indexing="ij")
    f = _lobe_values(model, tg, pg, view.theta, view.phi)
    light = np.asarray(illumination(tg, pg))
    weights = np.cos(tg) * np.sin(tg) * d_theta * d_phi
    return float(np.sum(f * light * weights))


def constant_illumination(level):
    """Uniform hemispherical illumination of the given level."""
    def illum(theta, phi):
        return np.full_like(np.asarray(theta, dtype=np.float64), level)
    return illum


def shading_value(model, sun, view, intensity):
    """Pixel radiance for a distant point light: I * f(sun, view) * cos(sun)."""
    return intensity * eval_brdf(model, sun, view) * math.cos(sun.theta)


def default_materials(num_classes=10):
    """A varied bank of num_classes materials, matte through sharply glossy.

    Interleaves diffuse albedo levels with glossy lobes of increasing
    shininess; every entry respects the white-point cap.
    """
    bank = [
        BrdfModel(0, LAMBERTIAN, albedo=0.08, name="matte-coal"),
        BrdfModel(0, LAMBERTIAN, albedo=0.22, name="matte-dark"),
        BrdfModel(0, LAMBERTIAN, albedo=0.40, name="matte-mid"),
        BrdfModel(0, LAMBERTIAN, albedo=0.62, name="matte-light"),
        BrdfModel(0, LAMBERTIAN, albedo=0.85, name="matte-bright"),
        BrdfModel(0, TWO_LOBE, albedo=0.30, specular_strength=0.10, shininess=6,
                  name="satin-soft"),
        BrdfModel(0, TWO_LOBE, albedo=0.50, specular_strength=0.07, shininess=14,
                  name="satin-warm"),
        BrdfModel(0, TWO_LOBE, albedo=0.18, specular_strength=0.055, shininess=30,
                  name="gloss-tight"),
        BrdfModel(0, PHONG_SPECULAR, specular_strength=0.11, shininess=16,
                  name="mirrorish"),
        BrdfModel(0, TWO_LOBE, albedo=0.70, specular_strength=0.02, shininess=40,
                  name="sheen-bright"),
    ]
    if num_classes > len(bank):
        raise ValueError(f"at most {len(bank)} default materials, "
                         f"{num_classes} requested")
    return [BrdfModel(i, m.kind, m.albedo, m.specular_strength, m.shininess, m.name)
            for i, m in enumerate(bank[:num_classes])]
