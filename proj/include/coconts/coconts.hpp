#pragma once

#include "coconts/approx.hpp"
#include "coconts/batch.hpp"
#include "coconts/corpus.hpp"
#include "coconts/enrich.hpp"
#include "coconts/error.hpp"
#include "coconts/half.hpp"
#include "coconts/loss.hpp"
#include "coconts/oracle.hpp"
#include "coconts/topr.hpp"
#include "coconts/trie.hpp"
