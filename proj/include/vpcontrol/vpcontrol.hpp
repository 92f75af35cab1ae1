#pragma once

#include "vpcontrol/characteristics.hpp"
#include "vpcontrol/control.hpp"
#include "vpcontrol/core.hpp"
#include "vpcontrol/fields.hpp"
#include "vpcontrol/io.hpp"
#include "vpcontrol/phase_space.hpp"
#include "vpcontrol/poisson.hpp"
#include "vpcontrol/verify.hpp"
#include "vpcontrol/vlasov.hpp"
