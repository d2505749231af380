#pragma once

#include "secfpp/error.hpp"
#include "secfpp/field.hpp"
#include "secfpp/rng.hpp"
#include "secfpp/poly.hpp"
#include "secfpp/lcc.hpp"
#include "secfpp/reduce.hpp"
#include "secfpp/transcript.hpp"
#include "secfpp/parallel.hpp"
#include "secfpp/cluster.hpp"
#include "secfpp/protocol.hpp"
#include "secfpp/special.hpp"
#include "secfpp/infotheory.hpp"
#include "secfpp/bench.hpp"
#include "secfpp/config.hpp"
#include "secfpp/io.hpp"
