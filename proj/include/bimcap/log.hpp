#pragma once

#include <functional>
#include <string_view>

namespace bimcap::log {

using Sink = std::function<void(std::string_view)>;

// Replaces the warning sink (stderr by default). Returns the previous sink.
Sink set_warning_sink(Sink sink);

void warn(std::string_view message);

}  // namespace bimcap::log
