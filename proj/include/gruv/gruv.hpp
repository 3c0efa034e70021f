#ifndef GRUV_GRUV_HPP
#define GRUV_GRUV_HPP

/**
 * @file gruv.hpp
 *
 * @brief Umbrella header for the robust unwanted-variation and testing library.
 */

#include "core.hpp"
#include "numeric.hpp"
#include "ruv_classic.hpp"
#include "gamma_ruv.hpp"
#include "gamma_lse.hpp"
#include "simgen.hpp"
#include "metrics.hpp"
#include "pipeline.hpp"
#include "io.hpp"
#include "bundle.hpp"

#endif
