#pragma once

// Umbrella header: the whole toolkit, in dependency order.

#include "slotkit/errors.hpp"
#include "slotkit/text.hpp"
#include "slotkit/core.hpp"
#include "slotkit/promptgen.hpp"
#include "slotkit/outparse.hpp"
#include "slotkit/backend.hpp"
#include "slotkit/extract.hpp"
#include "slotkit/jsonl.hpp"
#include "slotkit/evalkit.hpp"
#include "slotkit/sgd.hpp"
#include "slotkit/augment.hpp"
#include "slotkit/config.hpp"
#include "slotkit/session.hpp"
#include "slotkit/service.hpp"
