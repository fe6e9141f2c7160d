#pragma once

#include "jumpvar/asymptotics.hpp"
#include "jumpvar/cleaning.hpp"
#include "jumpvar/jumpdetect.hpp"
#include "jumpvar/marketdata.hpp"
#include "jumpvar/preavg.hpp"
#include "jumpvar/simlab.hpp"
