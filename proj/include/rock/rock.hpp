#pragma once

#include "rock/cache.hpp"
#include "rock/client.hpp"
#include "rock/datasets.hpp"
#include "rock/errors.hpp"
#include "rock/estimators.hpp"
#include "rock/event.hpp"
#include "rock/harness.hpp"
#include "rock/hash.hpp"
#include "rock/matching.hpp"
#include "rock/operations.hpp"
#include "rock/pipeline.hpp"
#include "rock/protocol.hpp"
#include "rock/stub.hpp"
#include "rock/suite.hpp"
#include "rock/temporal.hpp"
#include "rock/world.hpp"
