#pragma once

#include "ockham/asymptotics.hpp"
#include "ockham/decomposition.hpp"
#include "ockham/errors.hpp"
#include "ockham/evidence.hpp"
#include "ockham/generic_model.hpp"
#include "ockham/glm.hpp"
#include "ockham/quadrature.hpp"
#include "ockham/random.hpp"
#include "ockham/selection.hpp"
