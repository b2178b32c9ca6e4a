#include "netopt/estimate.hpp"

namespace netopt {

std::string to_string(EstimateSource source) {
  switch (source) {
    case EstimateSource::capacity:
      return "capacity";
    case EstimateSource::user_leave:
      return "user_leave";
    case EstimateSource::user_join_known:
      return "user_join_known";
    case EstimateSource::user_join_unknown:
      return "user_join_unknown";
    case EstimateSource::channel_quality:
      return "channel_quality";
    case EstimateSource::requirements:
      return "requirements";
    case EstimateSource::service_user_leave:
      return "service_user_leave";
    case EstimateSource::service_user_join:
      return "service_user_join";
    case EstimateSource::distribution:
      return "distribution";
  }
  return "unknown";
}

}  // namespace netopt
