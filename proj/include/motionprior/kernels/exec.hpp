#pragma once

namespace motionprior::kernels {

/// Serial is the reference path kept for testing; Parallel uses OpenMP over rows.
enum class Exec { Serial, Parallel };

}  // namespace motionprior::kernels
