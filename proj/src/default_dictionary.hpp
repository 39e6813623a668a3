#pragma once

namespace tbx::detail {

extern const char* const kDefaultDictionaryJson;

}  // namespace tbx::detail
