#pragma once

#include "nsqla/asymptotics.hpp"
#include "nsqla/config.hpp"
#include "nsqla/diffusion_model.hpp"
#include "nsqla/error.hpp"
#include "nsqla/estimators.hpp"
#include "nsqla/gauss_legendre.hpp"
#include "nsqla/harness.hpp"
#include "nsqla/interval_grid.hpp"
#include "nsqla/nelder_mead.hpp"
#include "nsqla/parallel.hpp"
#include "nsqla/quasi_likelihood.hpp"
#include "nsqla/random.hpp"
#include "nsqla/simulation.hpp"
#include "nsqla/text_io.hpp"
