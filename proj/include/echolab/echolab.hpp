#pragma once

#include "echolab/version.hpp"
#include "echolab/common.hpp"
#include "echolab/rng.hpp"
#include "echolab/parallel.hpp"
#include "echolab/spin_core.hpp"
#include "echolab/lmg.hpp"
#include "echolab/meanfield.hpp"
#include "echolab/floquet.hpp"
#include "echolab/interferometer.hpp"
#include "echolab/detection_noise.hpp"
#include "echolab/floquet_mc.hpp"
