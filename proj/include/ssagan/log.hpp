#pragma once

#include <functional>
#include <string>

namespace ssagan {

/// Non-fatal diagnostics. Default sink writes "warning: ..." to stderr.
void warn(const std::string& message);

using WarningSink = std::function<void(const std::string&)>;
/// Replaces the sink and returns the previous one. An empty sink restores the default.
WarningSink set_warning_sink(WarningSink sink);

}  // namespace ssagan
