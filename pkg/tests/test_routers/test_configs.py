import pytest
from fastapi import status
from httpx import AsyncClient

from udn import schemas

base_endpoint = "/api/configs"


@pytest.mark.anyio
class TestValidateEndpoint:
    """Tests for the configuration validation endpoint."""

    async def test_defaults_are_filled_in(self, api_client: AsyncClient):
        response = await api_client.post(
            f"{base_endpoint}/validate", json={"access_prob": 0.3}
        )
        assert response.status_code == status.HTTP_200_OK
        result = schemas.ConfigResponse(**response.json())
        assert result.message == "Configuration is valid"
        assert result.status_code == 200
        assert result.data.access_prob == 0.3
        assert result.data.horizon == 10_000

    async def test_lambda_alias(self, api_client: AsyncClient):
        response = await api_client.post(
            f"{base_endpoint}/validate", json={"lambda": 0.02}
        )
        assert response.status_code == status.HTTP_200_OK
        assert response.json()["data"]["intensity"] == 0.02

    async def test_every_violation_is_reported(self, api_client: AsyncClient):
        response = await api_client.post(
            f"{base_endpoint}/validate",
            json={"access_prob": 1.5, "path_loss_exponent": 2},
        )
        assert response.status_code == status.HTTP_422_UNPROCESSABLE_ENTITY
        fields = {error["loc"][-1] for error in response.json()["detail"]}
        assert {"access_prob", "path_loss_exponent"} <= fields

    async def test_link_longer_than_the_torus(self, api_client: AsyncClient):
        response = await api_client.post(
            f"{base_endpoint}/validate",
            json={"window_side": 10, "link_distance": 8},
        )
        assert response.status_code == status.HTTP_422_UNPROCESSABLE_ENTITY


@pytest.mark.anyio
class TestConditionTypeEndpoint:
    """Tests for the condition-type advice endpoint."""

    @pytest.mark.parametrize(
        "regime, expected",
        [
            ("Access probability approaches zero", "Type I"),
            ("Parameter ε for ε-stability approaches zero", "Type II"),
            ("DENSITY_TO_ZERO", "Type I"),
            ("long_link_vs_density", "Type II"),
        ],
    )
    async def test_known_regimes(
        self, api_client: AsyncClient, regime, expected
    ):
        response = await api_client.get(
            f"{base_endpoint}/condition-type", params={"regime": regime}
        )
        assert response.status_code == status.HTTP_200_OK
        result = schemas.ConditionTypeResponse(**response.json())
        assert result.message == "Condition type advised"
        assert result.data.value == expected

    async def test_unknown_regime(self, api_client: AsyncClient):
        response = await api_client.get(
            f"{base_endpoint}/condition-type",
            params={"regime": "Noise power approaches zero"},
        )
        assert response.status_code == status.HTTP_400_BAD_REQUEST
        detail = response.json()["detail"]
        assert "Noise power approaches zero" in detail["message"]
        assert len(detail["known_regimes"]) == len(schemas.Regime)

    async def test_regime_is_required(self, api_client: AsyncClient):
        response = await api_client.get(f"{base_endpoint}/condition-type")
        assert response.status_code == status.HTTP_422_UNPROCESSABLE_ENTITY
