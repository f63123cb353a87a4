/*
 * This code is part of cpdil.
 *
 * (C) Copyright cpdil contributors 2026.
 *
 * This code is licensed under the Apache License, Version 2.0. You may
 * obtain a copy of this license in the LICENSE.txt file in the root directory
 * of this source tree or at http://www.apache.org/licenses/LICENSE-2.0.
 *
 * Any modifications or derivative works of this code must retain this
 * copyright notice, and modified files need to carry a notice indicating
 * that they have been altered from the originals.
 */

#ifndef CPDIL_ERRORS_HPP
#define CPDIL_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace cpdil {

// Malformed or mismatched inputs (wrong graph, unknown letter, size mismatch).
struct input_error : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// A numerical precondition fails (not a contraction, indefinite Gram, ...).
struct domain_error : std::domain_error {
  using std::domain_error::domain_error;
};

// Missing structural data (absent fiber or product inside the cutoff).
struct structural_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// An enumeration exceeded its cap.
struct resource_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A hypothesis of the algorithm is violated (cyclic graph, 3-cycle present).
struct precondition_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Index outside the truncation cutoff.
struct range_error : std::out_of_range {
  using std::out_of_range::out_of_range;
};

} // namespace cpdil

#endif
