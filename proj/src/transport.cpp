#include "visvar/backends.hpp"
#include "visvar/http_backend.hpp"
#include "visvar/mock_backend.hpp"

namespace visvar::backends {

std::shared_ptr<Transport> make_transport(const BackendProfile& profile, std::uint64_t seed) {
    if (profile.endpoint.rfind("mock:", 0) == 0)
        return std::make_shared<MockTransport>(seed,
                                               MockTransport::parse_endpoint(profile.endpoint));
    return std::make_shared<HttpTransport>(profile);
}

}  // namespace visvar::backends
