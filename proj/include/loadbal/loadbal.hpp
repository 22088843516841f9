#pragma once

#include "loadbal/admissibility.hpp"
#include "loadbal/delay_models.hpp"
#include "loadbal/errors.hpp"
#include "loadbal/flow_synthesis.hpp"
#include "loadbal/kkt_solver.hpp"
#include "loadbal/network.hpp"
#include "loadbal/oracle.hpp"
#include "loadbal/simulator.hpp"
