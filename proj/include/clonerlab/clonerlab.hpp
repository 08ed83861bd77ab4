#pragma once

#include "fock.hpp"
#include "gaussian.hpp"
#include "measurement.hpp"
#include "network.hpp"
#include "operator_form.hpp"
#include "protocols.hpp"
#include "random.hpp"
#include "report_io.hpp"
#include "verify.hpp"
