#pragma once

// Umbrella header. Heavy HTTP-dependent pieces (llm_client, http_scorer,
// stub_llm) are split out so pure-metric consumers can skip them.

#include "posfaith/attention.hpp"
#include "posfaith/corpus.hpp"
#include "posfaith/errors.hpp"
#include "posfaith/positional.hpp"
#include "posfaith/report.hpp"
#include "posfaith/scorers.hpp"
#include "posfaith/segment.hpp"
#include "posfaith/text.hpp"
