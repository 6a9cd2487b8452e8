#pragma once

#include "cpsattack/action_db.hpp"
#include "cpsattack/cps_model.hpp"
#include "cpsattack/engine.hpp"
#include "cpsattack/error.hpp"
#include "cpsattack/harness.hpp"
#include "cpsattack/ingest.hpp"
#include "cpsattack/profile.hpp"
#include "cpsattack/rng.hpp"
