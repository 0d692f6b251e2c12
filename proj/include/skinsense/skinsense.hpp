#pragma once

#include "skinsense/errors.hpp"
#include "skinsense/framing.hpp"
#include "skinsense/modulator.hpp"
#include "skinsense/channel.hpp"
#include "skinsense/demodulator.hpp"
#include "skinsense/metrics.hpp"
