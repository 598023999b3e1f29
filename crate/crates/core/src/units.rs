//! Atomic-unit conversions.
//!
//! Everything inside the library runs in Hartree atomic units
//! (hbar = m_e = e = 1); these helpers convert the spectroscopic units
//! used to specify scenarios.

/// Hartree per wavenumber (cm^-1).
pub const HARTREE_PER_CM1: f64 = 1.0 / 219_474.631_363_2;

/// Boltzmann constant in hartree per kelvin.
pub const KB_AU_PER_K: f64 = 3.166_811_563e-6;

/// Femtoseconds per atomic time unit.
pub const AU_TIME_FS: f64 = 0.024_188_84;

/// Photon energy (hartree) times wavelength (nm): E = 45.56335 / lambda.
pub const NM_HARTREE_PRODUCT: f64 = 45.563_35;

pub fn cm1_to_hartree(wavenumber: f64) -> f64 {
    wavenumber * HARTREE_PER_CM1
}

pub fn hartree_to_cm1(energy: f64) -> f64 {
    energy / HARTREE_PER_CM1
}

/// Photon energy in hartree for a vacuum wavelength in nm.
pub fn nm_to_hartree(wavelength_nm: f64) -> f64 {
    NM_HARTREE_PRODUCT / wavelength_nm
}

pub fn hartree_to_nm(energy: f64) -> f64 {
    NM_HARTREE_PRODUCT / energy
}

pub fn au_to_fs(t: f64) -> f64 {
    t * AU_TIME_FS
}

pub fn fs_to_au(t: f64) -> f64 {
    t / AU_TIME_FS
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn conversions_round_trip() {
        assert_relative_eq!(hartree_to_cm1(cm1_to_hartree(250.0)), 250.0, max_relative = 1e-12);
        assert_relative_eq!(hartree_to_nm(nm_to_hartree(495.9)), 495.9, max_relative = 1e-12);
        assert_relative_eq!(fs_to_au(au_to_fs(3.7)), 3.7, max_relative = 1e-12);
    }

    #[test]
    fn known_values() {
        assert_relative_eq!(cm1_to_hartree(250.0), 1.139_083_8e-3, max_relative = 1e-6);
        assert_relative_eq!(nm_to_hartree(495.9), 0.091_880_1, max_relative = 1e-6);
    }
}
