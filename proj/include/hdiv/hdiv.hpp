#pragma once
// Umbrella header.
#include <hdiv/types.hpp>
#include <hdiv/dgp.hpp>
#include <hdiv/solvers.hpp>
#include <hdiv/tuning.hpp>
#include <hdiv/two_stage.hpp>
#include <hdiv/diagnostics.hpp>
#include <hdiv/metrics.hpp>
#include <hdiv/io.hpp>
#include <hdiv/harness.hpp>
