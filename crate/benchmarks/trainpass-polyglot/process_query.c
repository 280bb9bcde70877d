void ProcessQuery(request_t *request, response_t *response) {
    if (request->value < 3) {
        response->value = nondet_bool();
    } else {
        response->value = true;
    }
}
